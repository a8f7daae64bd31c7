#pragma once

// Data-parallel inner loops over sketch state. Every routine has a scalar
// reference and optional SIMD variants; the variant is picked once at runtime
// from the host CPU (override with SKETCHPRIV_ISA=scalar|avx2|neon).
//
// All variants are bit-identical to the scalar reference. register_stats sums
// 2^-r in four interleaved double lanes (lane = index mod 4) combined as
// (l0 + l1) + (l2 + l3); the SIMD code keeps exactly that order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sketchpriv::kernels {

enum class Isa { scalar, avx2, neon };

[[nodiscard]] auto isa_name(Isa isa) noexcept -> std::string_view;

struct RegisterStats {
  double harmonic_sum = 0.0;  // sum of 2^-r
  std::uint64_t zero_count = 0;
  std::uint64_t register_sum = 0;

  friend auto operator==(const RegisterStats&, const RegisterStats&) -> bool = default;
};

struct KernelTable {
  Isa isa;
  void (*merge_max_u8)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
  void (*or_u32)(std::uint32_t* dst, const std::uint32_t* src, std::size_t n);
  RegisterStats (*register_stats)(const std::uint8_t* regs, std::size_t n);
};

// ISAs compiled in and supported by this CPU; scalar is always first.
[[nodiscard]] auto available_isas() -> std::vector<Isa>;
// Throws InvalidArgument when the ISA is not available here.
[[nodiscard]] auto table_for(Isa isa) -> const KernelTable&;
[[nodiscard]] auto active() -> const KernelTable&;

void merge_max(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src);
void or_bits(std::span<std::uint32_t> dst, std::span<const std::uint32_t> src);
[[nodiscard]] auto register_stats(std::span<const std::uint8_t> regs) -> RegisterStats;

namespace detail {
auto scalar_table() noexcept -> const KernelTable&;
auto avx2_table() noexcept -> const KernelTable*;
auto neon_table() noexcept -> const KernelTable*;
}  // namespace detail

}  // namespace sketchpriv::kernels
