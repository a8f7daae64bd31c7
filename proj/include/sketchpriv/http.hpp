#pragma once

// HTTP+JSON front end for SketchService.
//
//   PUT  /sketch    {dimension, period, sketch: hex, overwrite?}
//   GET  /sketch?dimension=..&period=..        (RAW mode only)
//   POST /estimate  {keys: [{dimension, period}], rounding?} -> {estimate, merged}
//   POST /ingest    {dimension, period, algo, param, elements: [..], like?, overwrite?}
//
// Failures answer {error: <Errc name>, message}.

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "sketchpriv/error.hpp"
#include "sketchpriv/service.hpp"

namespace sketchpriv::service {

class HttpServer {
 public:
  explicit HttpServer(SketchService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  auto operator=(const HttpServer&) -> HttpServer& = delete;

  // Returns the bound port; port 0 picks a free one. Throws IoError.
  auto bind(const std::string& host, int port) -> int;
  // Blocks until stop().
  void listen();
  void start_background();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

class HttpSketchClient : public SketchQueryApi {
 public:
  HttpSketchClient(std::string host, int port);
  ~HttpSketchClient() override;

  void ingest(const IngestRequest& request) override;
  auto estimate(const std::vector<SketchKey>& keys, std::int64_t rounding)
      -> EstimateResponse override;
  auto get_raw(const SketchKey& key) -> std::vector<std::uint8_t>;
  void put_raw(const SketchKey& key, std::span<const std::uint8_t> bytes, bool overwrite);

  // Raw response body of the last request, for inspection in tests.
  [[nodiscard]] auto last_body() const -> const std::string& { return last_body_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string last_body_;
};

[[nodiscard]] auto http_status_for(Errc code) noexcept -> int;

}  // namespace sketchpriv::service
