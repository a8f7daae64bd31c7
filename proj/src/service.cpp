#include "sketchpriv/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "sketchpriv/error.hpp"
#include "sketchpriv/serialize.hpp"

namespace fs = std::filesystem;

namespace sketchpriv::service {

namespace {

constexpr std::string_view kStreamsDir = "_streams";

auto now_iso8601() -> std::string {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof(out), "%s.%03dZ", buf, static_cast<int>(ms.count()));
  return out;
}

auto read_lines(std::istream& in) -> std::vector<std::string> {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      out.push_back(std::move(line));
    }
  }
  if (in.bad()) {
    throw Error(Errc::io_error, "failed reading element stream");
  }
  return out;
}

}  // namespace

auto api_mode_name(ApiMode mode) noexcept -> std::string_view {
  return mode == ApiMode::raw ? "RAW" : "RESTRICTED";
}

auto round_estimate(double estimate, std::int64_t granularity) -> double {
  if (granularity < 0) {
    throw Error(Errc::domain_error, "rounding granularity must be non-negative");
  }
  if (granularity == 0) {
    return estimate;
  }
  const auto g = static_cast<double>(granularity);
  // Default FP environment rounds half to even.
  return std::nearbyint(estimate / g) * g;
}

auto build_sketch(std::istream& elements, Algorithm algo, int param, const Salt& salt) -> Sketch {
  auto sketch = Sketch::empty(algo, param, salt);
  std::string line;
  while (std::getline(elements, line)) {
    if (!line.empty()) {
      sketch.insert(salt.hash(line));
    }
  }
  if (elements.bad()) {
    throw Error(Errc::io_error, "failed reading element stream");
  }
  return sketch;
}

SketchService::SketchService(SketchStore& store, Salt salt, ApiPolicy policy, ServiceOptions options)
    : store_(store), salt_(std::move(salt)), policy_(std::move(policy)), options_(std::move(options)) {
  if (policy_.rounding < 0) {
    throw Error(Errc::domain_error, "rounding granularity must be non-negative");
  }
}

auto SketchService::load_or_create_salt(const fs::path& salt_path) -> Salt {
  if (fs::exists(salt_path)) {
    return Salt::load(salt_path.string());
  }
  auto salt = Salt::generate();
  if (salt_path.has_parent_path()) {
    fs::create_directories(salt_path.parent_path());
  }
  salt.save(salt_path.string());
  fs::permissions(salt_path, fs::perms::owner_read | fs::perms::owner_write,
                  fs::perm_options::replace);
  return salt;
}

auto SketchService::salt_fingerprint() const -> std::uint64_t {
  std::shared_lock lock(salt_mutex_);
  return salt_.fingerprint();
}

auto SketchService::stream_path(const SketchKey& key) const -> fs::path {
  validate_key(key);
  return store_.root() / kStreamsDir / key.dimension / (key.period + ".txt");
}

void SketchService::audit(std::string_view endpoint, const std::vector<SketchKey>& keys,
                          std::string_view outcome) {
  if (!policy_.audit_log_path) {
    return;
  }
  nlohmann::json line;
  line["timestamp"] = now_iso8601();
  line["endpoint"] = endpoint;
  line["mode"] = api_mode_name(policy_.mode);
  auto& arr = line["keys"] = nlohmann::json::array();
  for (const auto& k : keys) {
    arr.push_back(k.to_string());
  }
  line["outcome"] = outcome;
  std::lock_guard lock(audit_mutex_);
  std::ofstream out(*policy_.audit_log_path, std::ios::app);
  out << line.dump() << '\n';
  if (!out) {
    throw Error(Errc::io_error, "cannot append to audit log");
  }
}

auto SketchService::ingest_elements(const SketchKey& key, const std::vector<std::string>& elements,
                                    Algorithm algo, int param, bool overwrite) -> SketchRecord {
  validate_params(algo, param);
  for (const auto& e : elements) {
    if (e.empty()) {
      throw Error(Errc::invalid_element, "empty element in ingest request");
    }
    if (e.find('\n') != std::string::npos) {
      throw Error(Errc::invalid_element, "element contains a newline");
    }
  }
  std::shared_lock salt_lock(salt_mutex_);
  auto fresh = Sketch::empty(algo, param, salt_);
  for (const auto& e : elements) {
    fresh.insert(salt_.hash(e));
  }
  return store_.with_key_locked(key, [&] {
    const bool exists = store_.contains(key);
    SketchRecord record{key, fresh, std::chrono::system_clock::now()};
    if (exists && !overwrite) {
      record.sketch = merge(store_.get(key).sketch, fresh);
    }
    if (options_.keep_raw_streams) {
      const auto path = stream_path(key);
      fs::create_directories(path.parent_path());
      std::ofstream out(path, overwrite ? std::ios::trunc : std::ios::app);
      for (const auto& e : elements) {
        out << e << '\n';
      }
      if (!out) {
        throw Error(Errc::io_error, "cannot append raw stream " + path.string());
      }
    }
    store_.put_while_locked(record, true);
    return record;
  });
}

auto SketchService::ingest_stream(const SketchKey& key, std::istream& elements, Algorithm algo,
                                  int param, bool overwrite) -> SketchRecord {
  auto record = ingest_elements(key, read_lines(elements), algo, param, overwrite);
  audit("ingest", {key}, "ok");
  return record;
}

void SketchService::ingest(const IngestRequest& request) {
  try {
    auto algo = request.algo;
    auto param = request.param;
    if (request.like) {
      const auto like = store_.get(*request.like);
      algo = like.sketch.algorithm();
      param = like.sketch.param();
    }
    ingest_elements(request.key, request.elements, algo, param, request.overwrite);
  } catch (const Error& e) {
    audit("ingest", {request.key}, errc_name(e.code()));
    throw;
  }
  audit("ingest", {request.key}, "ok");
}

auto SketchService::estimate(const std::vector<SketchKey>& keys, std::int64_t rounding)
    -> EstimateResponse {
  try {
    if (keys.empty()) {
      throw Error(Errc::invalid_argument, "estimate needs at least one key");
    }
    if (rounding < 0) {
      throw Error(Errc::domain_error, "rounding granularity must be non-negative");
    }
    std::optional<Sketch> merged;
    for (const auto& key : keys) {
      auto record = store_.get(key);
      if (merged) {
        merged->merge_from(record.sketch);
      } else {
        merged = std::move(record.sketch);
      }
    }
    const auto granularity = std::max(policy_.rounding, rounding);
    EstimateResponse out{round_estimate(sketchpriv::estimate(*merged), granularity),
                         static_cast<std::int64_t>(keys.size())};
    audit("estimate", keys, "ok");
    return out;
  } catch (const Error& e) {
    audit("estimate", keys, errc_name(e.code()));
    throw;
  }
}

auto SketchService::get_raw(const SketchKey& key) -> std::vector<std::uint8_t> {
  if (policy_.mode == ApiMode::restricted) {
    audit("get_sketch", {key}, errc_name(Errc::policy_violation));
    throw Error(Errc::policy_violation, "raw sketch access is disabled in RESTRICTED mode");
  }
  try {
    auto bytes = store_.get_bytes(key);
    audit("get_sketch", {key}, "ok");
    return bytes;
  } catch (const Error& e) {
    audit("get_sketch", {key}, errc_name(e.code()));
    throw;
  }
}

void SketchService::put_raw(const SketchKey& key, std::span<const std::uint8_t> bytes, bool overwrite) {
  try {
    auto sketch = deserialize(bytes);
    if (sketch.salt_fingerprint() != salt_fingerprint()) {
      throw Error(Errc::salt_mismatch, "sketch was not built with this service's salt");
    }
    store_.put(SketchRecord{key, std::move(sketch), std::chrono::system_clock::now()}, overwrite);
  } catch (const Error& e) {
    audit("put_sketch", {key}, errc_name(e.code()));
    throw;
  }
  audit("put_sketch", {key}, "ok");
}

auto SketchService::rotate_salt(const Salt& new_salt, bool raw_streams_available) -> RotationReport {
  std::unique_lock lock(salt_mutex_);
  const auto keys = store_.list();
  RotationReport report;
  report.old_fingerprint = salt_.fingerprint();
  report.new_fingerprint = new_salt.fingerprint();
  if (!raw_streams_available) {
    report.refused = true;
    report.stranded = keys.size();
    return report;
  }

  // Rebuild everything first so a missing stream aborts before any write.
  std::vector<SketchRecord> rebuilt;
  rebuilt.reserve(keys.size());
  for (const auto& key : keys) {
    const auto path = stream_path(key);
    std::ifstream in(path);
    if (!in) {
      throw Error(Errc::io_error, "raw stream missing for " + key.to_string());
    }
    const auto old = store_.get(key);
    rebuilt.push_back(SketchRecord{
        key, build_sketch(in, old.sketch.algorithm(), old.sketch.param(), new_salt),
        std::chrono::system_clock::now()});
  }
  if (options_.salt_path) {
    new_salt.save(options_.salt_path->string());
  }
  for (const auto& record : rebuilt) {
    store_.put(record, true);
  }
  salt_ = new_salt;
  report.rebuilt = rebuilt.size();
  return report;
}

}  // namespace sketchpriv::service
