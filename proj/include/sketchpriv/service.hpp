#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "sketchpriv/hash.hpp"
#include "sketchpriv/sketch.hpp"
#include "sketchpriv/store.hpp"

namespace sketchpriv::service {

enum class ApiMode { raw, restricted };

[[nodiscard]] auto api_mode_name(ApiMode mode) noexcept -> std::string_view;

// RESTRICTED exposes merge-and-estimate only; raw sketch bytes never leave the
// service. Estimates are rounded half-to-even to a multiple of `rounding`
// (0 disables rounding).
struct ApiPolicy {
  ApiMode mode = ApiMode::restricted;
  std::int64_t rounding = 1;
  std::optional<std::filesystem::path> audit_log_path;
};

[[nodiscard]] auto round_estimate(double estimate, std::int64_t granularity) -> double;

struct IngestRequest {
  SketchKey key;
  Algorithm algo = Algorithm::hll;
  int param = 15;
  std::vector<std::string> elements;
  // Copy algo/param from an existing record instead.
  std::optional<SketchKey> like;
  bool overwrite = false;
};

struct EstimateResponse {
  double estimate = 0.0;
  std::int64_t merged = 0;
};

// The merge-and-estimate surface an outside client sees.
class SketchQueryApi {
 public:
  virtual ~SketchQueryApi() = default;
  virtual void ingest(const IngestRequest& request) = 0;
  // Effective rounding is max(policy rounding, requested rounding).
  virtual auto estimate(const std::vector<SketchKey>& keys, std::int64_t rounding)
      -> EstimateResponse = 0;
};

struct RotationReport {
  bool refused = false;
  std::size_t rebuilt = 0;
  std::size_t stranded = 0;  // records that could not be rebuilt
  std::uint64_t old_fingerprint = 0;
  std::uint64_t new_fingerprint = 0;
};

struct ServiceOptions {
  // Keep every ingested element under <root>/_streams so sketches can be
  // rebuilt after a salt rotation.
  bool keep_raw_streams = false;
  // Where the secret salt lives; rotation rewrites it.
  std::optional<std::filesystem::path> salt_path;
};

// Newline-delimited elements; blank lines (including a trailing newline) are skipped.
[[nodiscard]] auto build_sketch(std::istream& elements, Algorithm algo, int param, const Salt& salt)
    -> Sketch;

// The service provider: owns the salt, the store and the query policy.
// Thread-safe; salt rotation excludes every other operation.
class SketchService : public SketchQueryApi {
 public:
  SketchService(SketchStore& store, Salt salt, ApiPolicy policy, ServiceOptions options = {});

  // Loads the salt from `salt_path` or creates one there (mode 0600).
  static auto load_or_create_salt(const std::filesystem::path& salt_path) -> Salt;

  // Folds the stream into the record at key (creating it, or merging into the
  // existing one unless overwrite is set).
  auto ingest_stream(const SketchKey& key, std::istream& elements, Algorithm algo, int param,
                     bool overwrite = false) -> SketchRecord;
  void ingest(const IngestRequest& request) override;

  auto estimate(const std::vector<SketchKey>& keys, std::int64_t rounding = 0)
      -> EstimateResponse override;

  // RAW mode only; PolicyViolation otherwise.
  auto get_raw(const SketchKey& key) -> std::vector<std::uint8_t>;
  // Stores an externally built sketch; it must carry this service's salt fingerprint.
  void put_raw(const SketchKey& key, std::span<const std::uint8_t> bytes, bool overwrite);

  auto rotate_salt(const Salt& new_salt, bool raw_streams_available) -> RotationReport;

  [[nodiscard]] auto policy() const noexcept -> const ApiPolicy& { return policy_; }
  [[nodiscard]] auto salt_fingerprint() const -> std::uint64_t;
  [[nodiscard]] auto store() noexcept -> SketchStore& { return store_; }

 private:
  auto ingest_elements(const SketchKey& key, const std::vector<std::string>& elements,
                       Algorithm algo, int param, bool overwrite) -> SketchRecord;
  void audit(std::string_view endpoint, const std::vector<SketchKey>& keys, std::string_view outcome);
  auto stream_path(const SketchKey& key) const -> std::filesystem::path;

  SketchStore& store_;
  Salt salt_;
  ApiPolicy policy_;
  ServiceOptions options_;
  mutable std::shared_mutex salt_mutex_;
  std::mutex audit_mutex_;
};

}  // namespace sketchpriv::service
