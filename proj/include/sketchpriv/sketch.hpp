#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sketchpriv/hash.hpp"

namespace sketchpriv {

enum class Algorithm : std::uint8_t { kmv = 1, pcsa = 2, loglog = 3, hll = 4 };

[[nodiscard]] auto algorithm_name(Algorithm algo) noexcept -> std::string_view;
// Accepts "kmv", "pcsa", "loglog", "hll" (case-insensitive).
[[nodiscard]] auto parse_algorithm(std::string_view name) -> Algorithm;

inline constexpr int kMinPrecision = 4;
inline constexpr int kMaxPrecision = 18;
inline constexpr int kMinKmvK = 8;
inline constexpr int kMaxKmvK = 65535;
inline constexpr int kMaxPcsaK = 65535;
inline constexpr int kPcsaBitmapBits = 32;

// Throws DomainError if param is outside the range allowed for algo.
void validate_params(Algorithm algo, int param);

struct KmvState {
  std::vector<std::uint64_t> hashes;  // strictly ascending, at most k entries
  friend auto operator==(const KmvState&, const KmvState&) -> bool = default;
};

struct PcsaState {
  std::vector<std::uint32_t> bitmaps;  // k bitmaps
  friend auto operator==(const PcsaState&, const PcsaState&) -> bool = default;
};

struct RegisterState {
  std::vector<std::uint8_t> registers;  // 2^p registers, each in [0, 65-p]
  friend auto operator==(const RegisterState&, const RegisterState&) -> bool = default;
};

using SketchState = std::variant<KmvState, PcsaState, RegisterState>;

// State of one of the four deterministic cardinality estimators. Value type:
// copies are independent; the mutating members require exclusive access.
class Sketch {
 public:
  static auto empty(Algorithm algo, int param, std::uint64_t salt_fingerprint) -> Sketch;
  static auto empty(Algorithm algo, int param, const Salt& salt) -> Sketch {
    return empty(algo, param, salt.fingerprint());
  }
  // Validates every state invariant; throws FormatError on violation.
  static auto from_state(Algorithm algo, int param, std::uint64_t salt_fingerprint,
                         SketchState state) -> Sketch;

  [[nodiscard]] auto algorithm() const noexcept -> Algorithm { return algo_; }
  // k for KMV and PCSA, p for LogLog and HLL.
  [[nodiscard]] auto param() const noexcept -> int { return param_; }
  [[nodiscard]] auto salt_fingerprint() const noexcept -> std::uint64_t { return salt_fp_; }
  [[nodiscard]] auto state() const noexcept -> const SketchState& { return state_; }
  [[nodiscard]] auto is_empty() const noexcept -> bool;

  [[nodiscard]] auto kmv_hashes() const -> std::span<const std::uint64_t>;
  [[nodiscard]] auto pcsa_bitmaps() const -> std::span<const std::uint32_t>;
  [[nodiscard]] auto registers() const -> std::span<const std::uint8_t>;

  // Folds a hash into the state. No salt check: callers hashing with the
  // right salt is the contract (see add()).
  void insert(HashValue h);
  // True iff insert(h) would leave the state unchanged.
  [[nodiscard]] auto ignores(HashValue h) const -> bool;
  // Throws ParamMismatch or SaltMismatch when the sketches are incompatible.
  void merge_from(const Sketch& other);

  [[nodiscard]] auto same_shape(const Sketch& other) const noexcept -> bool {
    return algo_ == other.algo_ && param_ == other.param_;
  }

  friend auto operator==(const Sketch&, const Sketch&) -> bool = default;

 private:
  Sketch(Algorithm algo, int param, std::uint64_t salt_fp, SketchState state)
      : algo_(algo), param_(param), salt_fp_(salt_fp), state_(std::move(state)) {}

  Algorithm algo_;
  int param_;
  std::uint64_t salt_fp_;
  SketchState state_;
};

// Bucket and bit position a hash selects in a PCSA sketch with k bitmaps.
struct PcsaSlot {
  std::uint32_t bucket;
  int bit;  // 0-based, < 32
};
[[nodiscard]] auto pcsa_slot(HashValue h, int k) noexcept -> PcsaSlot;

// Throws SaltMismatch unless salt matches the sketch's fingerprint.
void check_salt(const Sketch& m, const Salt& salt);

[[nodiscard]] auto add(Sketch m, std::string_view element, const Salt& salt) -> Sketch;
[[nodiscard]] auto merge(const Sketch& a, const Sketch& b) -> Sketch;
[[nodiscard]] auto is_ignored(const Sketch& m, std::string_view element, const Salt& salt) -> bool;

// Distinct-count estimate; deterministic function of the state.
[[nodiscard]] auto estimate(const Sketch& m) -> double;

// Example RSE constants per algorithm divided by sqrt(k), with k recovered
// from the memory budget: m = 32k (KMV, PCSA), 5k (LogLog), 6k (HLL).
[[nodiscard]] auto theoretical_rse(Algorithm algo, std::uint64_t memory_bits) -> double;
[[nodiscard]] auto bits_per_unit(Algorithm algo) noexcept -> int;
[[nodiscard]] auto rse_constant(Algorithm algo) noexcept -> double;

}  // namespace sketchpriv
