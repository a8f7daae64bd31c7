#include "sketchpriv/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <bit>

namespace sketchpriv::kernels::detail {

namespace {

void merge_max_u8(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    vst1q_u8(dst + i, vmaxq_u8(vld1q_u8(dst + i), vld1q_u8(src + i)));
  }
  for (; i < n; ++i) {
    dst[i] = std::max(dst[i], src[i]);
  }
}

void or_u32(std::uint32_t* dst, const std::uint32_t* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    vst1q_u32(dst + i, vorrq_u32(vld1q_u32(dst + i), vld1q_u32(src + i)));
  }
  for (; i < n; ++i) {
    dst[i] |= src[i];
  }
}

RegisterStats register_stats(const std::uint8_t* regs, std::size_t n) {
  RegisterStats s;
  std::size_t i = 0;
  uint64x2_t sums = vdupq_n_u64(0);
  uint64x2_t zeros = vdupq_n_u64(0);
  for (; i + 16 <= n; i += 16) {
    const uint8x16_t v = vld1q_u8(regs + i);
    sums = vpadalq_u32(sums, vpaddlq_u16(vpaddlq_u8(v)));
    const uint8x16_t is_zero = vshrq_n_u8(vceqzq_u8(v), 7);
    zeros = vpadalq_u32(zeros, vpaddlq_u16(vpaddlq_u8(is_zero)));
  }
  s.register_sum = vgetq_lane_u64(sums, 0) + vgetq_lane_u64(sums, 1);
  s.zero_count = vgetq_lane_u64(zeros, 0) + vgetq_lane_u64(zeros, 1);
  for (; i < n; ++i) {
    s.register_sum += regs[i];
    s.zero_count += regs[i] == 0 ? 1 : 0;
  }

  // Lanes 0,1 live in acc01 and lanes 2,3 in acc23, matching index mod 4.
  const int64x2_t bias = vdupq_n_s64(1023);
  float64x2_t acc01 = vdupq_n_f64(0.0);
  float64x2_t acc23 = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const int64x2_t r01 = {regs[j], regs[j + 1]};
    const int64x2_t r23 = {regs[j + 2], regs[j + 3]};
    acc01 = vaddq_f64(acc01, vreinterpretq_f64_s64(vshlq_n_s64(vsubq_s64(bias, r01), 52)));
    acc23 = vaddq_f64(acc23, vreinterpretq_f64_s64(vshlq_n_s64(vsubq_s64(bias, r23), 52)));
  }
  double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1), vgetq_lane_f64(acc23, 0),
                    vgetq_lane_f64(acc23, 1)};
  for (; j < n; ++j) {
    lane[j & 3] += std::bit_cast<double>(static_cast<std::uint64_t>(1023 - regs[j]) << 52);
  }
  s.harmonic_sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  return s;
}

}  // namespace

auto neon_table() noexcept -> const KernelTable* {
  static constexpr KernelTable kTable{Isa::neon, merge_max_u8, or_u32, register_stats};
  return &kTable;
}

}  // namespace sketchpriv::kernels::detail

#else

namespace sketchpriv::kernels::detail {
auto neon_table() noexcept -> const KernelTable* { return nullptr; }
}  // namespace sketchpriv::kernels::detail

#endif
