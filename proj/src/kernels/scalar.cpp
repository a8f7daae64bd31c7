#include <algorithm>
#include <bit>

#include "sketchpriv/kernels.hpp"

namespace sketchpriv::kernels::detail {

namespace {

void merge_max_u8(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = std::max(dst[i], src[i]);
  }
}

void or_u32(std::uint32_t* dst, const std::uint32_t* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] |= src[i];
  }
}

// 2^-r built directly from the exponent field; exact for r in [0, 1022].
inline auto pow2_neg(std::uint8_t r) noexcept -> double {
  return std::bit_cast<double>(static_cast<std::uint64_t>(1023 - r) << 52);
}

RegisterStats register_stats(const std::uint8_t* regs, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  RegisterStats s;
  for (std::size_t i = 0; i < n; ++i) {
    lane[i & 3] += pow2_neg(regs[i]);
    s.zero_count += regs[i] == 0 ? 1 : 0;
    s.register_sum += regs[i];
  }
  s.harmonic_sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  return s;
}

}  // namespace

auto scalar_table() noexcept -> const KernelTable& {
  static constexpr KernelTable kTable{Isa::scalar, merge_max_u8, or_u32, register_stats};
  return kTable;
}

}  // namespace sketchpriv::kernels::detail
