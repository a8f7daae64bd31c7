#include "sketchpriv/http.hpp"

#include <httplib.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "sketchpriv/error.hpp"

using nlohmann::json;

namespace sketchpriv::service {

namespace {

constexpr const char* kJson = "application/json";

auto errc_from_name(std::string_view name) -> Errc {
  for (int i = 0; i <= static_cast<int>(Errc::service_unavailable); ++i) {
    const auto code = static_cast<Errc>(i);
    if (errc_name(code) == name) {
      return code;
    }
  }
  return Errc::io_error;
}

auto key_from_json(const json& j) -> SketchKey {
  return {j.at("dimension").get<std::string>(), j.at("period").get<std::string>()};
}

auto key_to_json(const SketchKey& k) -> json { return {{"dimension", k.dimension}, {"period", k.period}}; }

auto estimate_to_json(double v) -> json {
  if (std::isfinite(v) && v == std::nearbyint(v) && std::fabs(v) < 9.0e15) {
    return static_cast<std::int64_t>(v);
  }
  return v;
}

void reply_error(httplib::Response& res, Errc code, const std::string& message) {
  res.status = http_status_for(code);
  res.set_content(json{{"error", errc_name(code)}, {"message", message}}.dump(), kJson);
}

// Runs fn, turning library and JSON errors into error responses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    reply_error(res, Errc::invalid_argument, e.what());
  }
}

}  // namespace

auto http_status_for(Errc code) noexcept -> int {
  switch (code) {
    case Errc::unknown_key:
    case Errc::unknown_sketch:
      return 404;
    case Errc::duplicate_key:
      return 409;
    case Errc::policy_violation:
      return 403;
    case Errc::io_error:
      return 500;
    case Errc::service_unavailable:
      return 503;
    default:
      return 400;
  }
}

struct HttpServer::Impl {
  explicit Impl(SketchService& s) : service(s) {}
  SketchService& service;
  httplib::Server server;
};

HttpServer::HttpServer(SketchService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& srv = impl_->server;

  srv.Put("/sketch", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      const auto key = key_from_json(body);
      const auto bytes = from_hex(body.at("sketch").get<std::string>());
      svc.put_raw(key, bytes, body.value("overwrite", false));
      res.status = 201;
      res.set_content(key_to_json(key).dump(), kJson);
    });
  });

  srv.Get("/sketch", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const SketchKey key{req.get_param_value("dimension"), req.get_param_value("period")};
      const auto bytes = svc.get_raw(key);
      auto out = key_to_json(key);
      out["sketch"] = to_hex(bytes);
      res.set_content(out.dump(), kJson);
    });
  });

  srv.Post("/estimate", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      std::vector<SketchKey> keys;
      for (const auto& k : body.at("keys")) {
        keys.push_back(key_from_json(k));
      }
      const auto r = svc.estimate(keys, body.value("rounding", std::int64_t{0}));
      res.set_content(json{{"estimate", estimate_to_json(r.estimate)}, {"merged", r.merged}}.dump(),
                      kJson);
    });
  });

  srv.Post("/ingest", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      IngestRequest request;
      request.key = key_from_json(body);
      if (body.contains("like")) {
        request.like = key_from_json(body.at("like"));
      } else {
        request.algo = parse_algorithm(body.at("algo").get<std::string>());
        request.param = body.at("param").get<int>();
      }
      request.elements = body.value("elements", std::vector<std::string>{});
      request.overwrite = body.value("overwrite", false);
      svc.ingest(request);
      res.set_content(key_to_json(request.key).dump(), kJson);
    });
  });
}

HttpServer::~HttpServer() { stop(); }

auto HttpServer::bind(const std::string& host, int port) -> int {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host.c_str());
    if (bound < 0) {
      throw Error(Errc::io_error, "cannot bind " + host);
    }
    return bound;
  }
  if (!impl_->server.bind_to_port(host.c_str(), port)) {
    throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::start_background() {
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (impl_) {
    impl_->server.stop();
  }
  if (thread_.joinable()) {
    thread_.join();
  }
}

struct HttpSketchClient::Impl {
  Impl(const std::string& host, int port) : client(host, port) {}
  httplib::Client client;
};

HttpSketchClient::HttpSketchClient(std::string host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {
  impl_->client.set_connection_timeout(5);
  impl_->client.set_read_timeout(30);
}

HttpSketchClient::~HttpSketchClient() = default;

namespace {

auto check(const httplib::Result& res, std::string& last_body) -> json {
  if (!res) {
    throw Error(Errc::service_unavailable, httplib::to_string(res.error()));
  }
  last_body = res->body;
  json body = res->body.empty() ? json::object() : json::parse(res->body, nullptr, false);
  if (res->status >= 400) {
    const auto name = body.is_object() ? body.value("error", std::string("IoError")) : "IoError";
    const auto message = body.is_object() ? body.value("message", res->body) : res->body;
    throw Error(errc_from_name(name), message);
  }
  return body;
}

}  // namespace

void HttpSketchClient::ingest(const IngestRequest& request) {
  json body = key_to_json(request.key);
  if (request.like) {
    body["like"] = key_to_json(*request.like);
  } else {
    body["algo"] = algorithm_name(request.algo);
    body["param"] = request.param;
  }
  body["elements"] = request.elements;
  body["overwrite"] = request.overwrite;
  check(impl_->client.Post("/ingest", body.dump(), kJson), last_body_);
}

auto HttpSketchClient::estimate(const std::vector<SketchKey>& keys, std::int64_t rounding)
    -> EstimateResponse {
  json body;
  auto& arr = body["keys"] = json::array();
  for (const auto& k : keys) {
    arr.push_back(key_to_json(k));
  }
  body["rounding"] = rounding;
  const auto out = check(impl_->client.Post("/estimate", body.dump(), kJson), last_body_);
  return {out.at("estimate").get<double>(), out.at("merged").get<std::int64_t>()};
}

auto HttpSketchClient::get_raw(const SketchKey& key) -> std::vector<std::uint8_t> {
  const httplib::Params params{{"dimension", key.dimension}, {"period", key.period}};
  const auto out = check(impl_->client.Get("/sketch", params, httplib::Headers{}), last_body_);
  return from_hex(out.at("sketch").get<std::string>());
}

void HttpSketchClient::put_raw(const SketchKey& key, std::span<const std::uint8_t> bytes,
                               bool overwrite) {
  json body = key_to_json(key);
  body["sketch"] = to_hex(bytes);
  body["overwrite"] = overwrite;
  check(impl_->client.Put("/sketch", body.dump(), kJson), last_body_);
}

}  // namespace sketchpriv::service
