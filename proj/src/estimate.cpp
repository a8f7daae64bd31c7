#include <bit>
#include <cmath>
#include <numbers>

#include "sketchpriv/error.hpp"
#include "sketchpriv/kernels.hpp"
#include "sketchpriv/sketch.hpp"

namespace sketchpriv {

namespace {

constexpr double kTwoTo64 = 18446744073709551616.0;

// Fewer than k hashes means every distinct element is still stored.
auto estimate_kmv(std::span<const std::uint64_t> hashes, int k) -> double {
  if (hashes.size() < static_cast<std::size_t>(k)) {
    return static_cast<double>(hashes.size());
  }
  const double v = (static_cast<double>(hashes.back()) + 1.0) / kTwoTo64;
  return (k - 1) / v;
}

// Flajolet-Martin: R_i is the index of the lowest zero bit of bitmap i.
auto estimate_pcsa(std::span<const std::uint32_t> bitmaps) -> double {
  constexpr double kPhi = 0.77351;
  std::uint64_t total = 0;
  bool any = false;
  for (const auto b : bitmaps) {
    any = any || b != 0;
    total += static_cast<std::uint64_t>(std::countr_one(b));
  }
  if (!any) {
    return 0.0;
  }
  const auto k = static_cast<double>(bitmaps.size());
  return k / kPhi * std::exp2(static_cast<double>(total) / k);
}

// Durand-Flajolet alpha_m = alpha_inf - (2 pi^2 + ln^2 2) / (48 m).
auto estimate_loglog(std::span<const std::uint8_t> regs) -> double {
  constexpr double kAlphaInf = 0.39701;
  const auto stats = kernels::register_stats(regs);
  if (stats.zero_count == regs.size()) {
    return 0.0;
  }
  const auto m = static_cast<double>(regs.size());
  const double alpha = kAlphaInf - (2.0 * std::numbers::pi * std::numbers::pi +
                                    std::numbers::ln2 * std::numbers::ln2) /
                                       (48.0 * m);
  return alpha * m * std::exp2(static_cast<double>(stats.register_sum) / m);
}

auto hll_alpha(std::size_t m) noexcept -> double {
  switch (m) {
    case 16:
      return 0.673;
    case 32:
      return 0.697;
    case 64:
      return 0.709;
    default:
      return 0.7213 / (1.0 + 1.079 / static_cast<double>(m));
  }
}

// Raw harmonic-mean estimate alpha m^2 / sum 2^-C, replaced by linear counting
// m ln(m / V) while the raw value is at most 2.5 m and V > 0 registers are
// still zero. The 64-bit hash makes a large-range correction unnecessary.
auto estimate_hll(std::span<const std::uint8_t> regs) -> double {
  const auto stats = kernels::register_stats(regs);
  const auto m = static_cast<double>(regs.size());
  const double raw = hll_alpha(regs.size()) * m * m / stats.harmonic_sum;
  if (raw <= 2.5 * m && stats.zero_count > 0) {
    return m * std::log(m / static_cast<double>(stats.zero_count));
  }
  return raw;
}

}  // namespace

auto estimate(const Sketch& m) -> double {
  switch (m.algorithm()) {
    case Algorithm::kmv:
      return estimate_kmv(m.kmv_hashes(), m.param());
    case Algorithm::pcsa:
      return estimate_pcsa(m.pcsa_bitmaps());
    case Algorithm::loglog:
      return estimate_loglog(m.registers());
    case Algorithm::hll:
      return estimate_hll(m.registers());
  }
  throw Error(Errc::domain_error, "unknown algorithm");
}

}  // namespace sketchpriv
