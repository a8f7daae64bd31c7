#include "sketchpriv/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <bit>

namespace sketchpriv::kernels::detail {

namespace {

__attribute__((target("avx2"))) void merge_max_u8(std::uint8_t* dst, const std::uint8_t* src,
                                                  std::size_t n) {
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    const __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_max_epu8(a, b));
  }
  for (; i < n; ++i) {
    dst[i] = std::max(dst[i], src[i]);
  }
}

__attribute__((target("avx2"))) void or_u32(std::uint32_t* dst, const std::uint32_t* src,
                                            std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    const __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_or_si256(a, b));
  }
  for (; i < n; ++i) {
    dst[i] |= src[i];
  }
}

__attribute__((target("avx2"))) RegisterStats register_stats(const std::uint8_t* regs,
                                                             std::size_t n) {
  RegisterStats s;

  // Integer part: byte sums via SAD, zero counts via compare + popcount.
  std::size_t i = 0;
  __m256i sums = _mm256_setzero_si256();
  const __m256i zero = _mm256_setzero_si256();
  for (; i + 32 <= n; i += 32) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(regs + i));
    sums = _mm256_add_epi64(sums, _mm256_sad_epu8(v, zero));
    const auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, zero)));
    s.zero_count += static_cast<std::uint64_t>(std::popcount(mask));
  }
  alignas(32) std::uint64_t partial[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(partial), sums);
  s.register_sum = partial[0] + partial[1] + partial[2] + partial[3];
  for (; i < n; ++i) {
    s.register_sum += regs[i];
    s.zero_count += regs[i] == 0 ? 1 : 0;
  }

  // Harmonic part: four double lanes, lane j accumulates indices = j mod 4.
  const __m256i bias = _mm256_set1_epi64x(1023);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    std::uint32_t four;
    __builtin_memcpy(&four, regs + j, sizeof(four));
    const __m256i r = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(static_cast<int>(four)));
    const __m256i bits = _mm256_slli_epi64(_mm256_sub_epi64(bias, r), 52);
    acc = _mm256_add_pd(acc, _mm256_castsi256_pd(bits));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  for (; j < n; ++j) {
    lane[j & 3] += std::bit_cast<double>(static_cast<std::uint64_t>(1023 - regs[j]) << 52);
  }
  s.harmonic_sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  return s;
}

}  // namespace

auto avx2_table() noexcept -> const KernelTable* {
  static constexpr KernelTable kTable{Isa::avx2, merge_max_u8, or_u32, register_stats};
  __builtin_cpu_init();
  if (!__builtin_cpu_supports("avx2")) {
    return nullptr;
  }
  return &kTable;
}

}  // namespace sketchpriv::kernels::detail

#else

namespace sketchpriv::kernels::detail {
auto avx2_table() noexcept -> const KernelTable* { return nullptr; }
}  // namespace sketchpriv::kernels::detail

#endif
