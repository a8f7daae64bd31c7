#include <cstdlib>
#include <string>

#include "sketchpriv/error.hpp"
#include "sketchpriv/kernels.hpp"

namespace sketchpriv::kernels {

auto isa_name(Isa isa) noexcept -> std::string_view {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

namespace {

auto lookup(Isa isa) -> const KernelTable* {
  switch (isa) {
    case Isa::scalar:
      return &detail::scalar_table();
    case Isa::avx2:
      return detail::avx2_table();
    case Isa::neon:
      return detail::neon_table();
  }
  return nullptr;
}

auto select() -> const KernelTable& {
  if (const char* forced = std::getenv("SKETCHPRIV_ISA"); forced != nullptr) {
    for (const Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
      if (isa_name(isa) == forced) {
        if (const auto* t = lookup(isa)) {
          return *t;
        }
      }
    }
  }
  if (const auto* t = detail::avx2_table()) return *t;
  if (const auto* t = detail::neon_table()) return *t;
  return detail::scalar_table();
}

}  // namespace

auto available_isas() -> std::vector<Isa> {
  std::vector<Isa> out{Isa::scalar};
  for (const Isa isa : {Isa::avx2, Isa::neon}) {
    if (lookup(isa) != nullptr) {
      out.push_back(isa);
    }
  }
  return out;
}

auto table_for(Isa isa) -> const KernelTable& {
  if (const auto* t = lookup(isa)) {
    return *t;
  }
  throw Error(Errc::invalid_argument, std::string("ISA not available: ") + std::string(isa_name(isa)));
}

auto active() -> const KernelTable& {
  static const KernelTable& table = select();
  return table;
}

void merge_max(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) {
  if (dst.size() != src.size()) {
    throw Error(Errc::param_mismatch, "register arrays differ in length");
  }
  active().merge_max_u8(dst.data(), src.data(), dst.size());
}

void or_bits(std::span<std::uint32_t> dst, std::span<const std::uint32_t> src) {
  if (dst.size() != src.size()) {
    throw Error(Errc::param_mismatch, "bitmap arrays differ in length");
  }
  active().or_u32(dst.data(), src.data(), dst.size());
}

auto register_stats(std::span<const std::uint8_t> regs) -> RegisterStats {
  return active().register_stats(regs.data(), regs.size());
}

}  // namespace sketchpriv::kernels
