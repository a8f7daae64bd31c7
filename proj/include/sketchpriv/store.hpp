#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "sketchpriv/sketch.hpp"

namespace sketchpriv::service {

// (dimension, period). Dimensions are [A-Za-z0-9._-]+ not starting with '.' or
// '_' (those prefixes are reserved for service files); periods are ISO-8601
// calendar dates YYYY-MM-DD.
struct SketchKey {
  std::string dimension;
  std::string period;

  friend auto operator<=>(const SketchKey&, const SketchKey&) = default;
  [[nodiscard]] auto to_string() const -> std::string { return dimension + "/" + period; }
};

// Throws InvalidArgument on a malformed key.
void validate_key(const SketchKey& key);

struct SketchRecord {
  SketchKey key;
  Sketch sketch;
  std::chrono::system_clock::time_point created_at{};

  [[nodiscard]] auto salt_fingerprint() const noexcept -> std::uint64_t {
    return sketch.salt_fingerprint();
  }
};

// One file per record at <root>/<dimension>/<period>.skp in the binary sketch
// format. Writes go to a temporary file that is renamed into place, so a
// reader sees either the old record or the new one. Writers are serialised
// per key; readers never block.
class SketchStore {
 public:
  explicit SketchStore(std::filesystem::path root);

  // Throws DuplicateKey if the key exists and overwrite is false.
  void put(const SketchRecord& record, bool overwrite = false);
  [[nodiscard]] auto get(const SketchKey& key) const -> SketchRecord;
  [[nodiscard]] auto get_bytes(const SketchKey& key) const -> std::vector<std::uint8_t>;
  [[nodiscard]] auto contains(const SketchKey& key) const -> bool;
  // All keys in (dimension, period) order.
  [[nodiscard]] auto list() const -> std::vector<SketchKey>;
  // Keys of one dimension with first <= period <= last, in period order.
  [[nodiscard]] auto scan(const std::string& dimension, const std::string& first,
                          const std::string& last) const -> std::vector<SketchKey>;

  [[nodiscard]] auto root() const noexcept -> const std::filesystem::path& { return root_; }
  [[nodiscard]] auto path_for(const SketchKey& key) const -> std::filesystem::path;

  // Same as put(), for callers already inside with_key_locked(record.key, ...).
  void put_while_locked(const SketchRecord& record, bool overwrite);

  // Runs fn while holding the writer lock of key.
  template <class Fn>
  auto with_key_locked(const SketchKey& key, Fn&& fn) -> decltype(fn()) {
    std::lock_guard lock(stripe_for(key));
    return fn();
  }

 private:
  auto stripe_for(const SketchKey& key) const -> std::mutex&;

  std::filesystem::path root_;
  mutable std::array<std::mutex, 64> stripes_;
};

}  // namespace sketchpriv::service
