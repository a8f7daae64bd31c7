#include "sketchpriv/sketch.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "sketchpriv/error.hpp"
#include "sketchpriv/kernels.hpp"

namespace sketchpriv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

auto empty_state(Algorithm algo, int param) -> SketchState {
  switch (algo) {
    case Algorithm::kmv:
      return KmvState{};
    case Algorithm::pcsa:
      return PcsaState{std::vector<std::uint32_t>(static_cast<std::size_t>(param), 0)};
    case Algorithm::loglog:
    case Algorithm::hll:
      return RegisterState{std::vector<std::uint8_t>(std::size_t{1} << param, 0)};
  }
  throw Error(Errc::domain_error, "unknown algorithm");
}

auto expected_index(Algorithm algo) noexcept -> std::size_t {
  switch (algo) {
    case Algorithm::kmv:
      return 0;
    case Algorithm::pcsa:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

auto algorithm_name(Algorithm algo) noexcept -> std::string_view {
  switch (algo) {
    case Algorithm::kmv:
      return "kmv";
    case Algorithm::pcsa:
      return "pcsa";
    case Algorithm::loglog:
      return "loglog";
    case Algorithm::hll:
      return "hll";
  }
  return "unknown";
}

auto parse_algorithm(std::string_view name) -> Algorithm {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto algo : {Algorithm::kmv, Algorithm::pcsa, Algorithm::loglog, Algorithm::hll}) {
    if (algorithm_name(algo) == lower) {
      return algo;
    }
  }
  throw Error(Errc::domain_error, "unknown algorithm '" + std::string(name) + "'");
}

void validate_params(Algorithm algo, int param) {
  auto require = [&](int lo, int hi, const char* what) {
    if (param < lo || param > hi) {
      throw Error(Errc::domain_error, std::string(algorithm_name(algo)) + " " + what + "=" +
                                          std::to_string(param) + " outside [" +
                                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  switch (algo) {
    case Algorithm::kmv:
      require(kMinKmvK, kMaxKmvK, "k");
      return;
    case Algorithm::pcsa:
      require(1, kMaxPcsaK, "k");
      return;
    case Algorithm::loglog:
    case Algorithm::hll:
      require(kMinPrecision, kMaxPrecision, "p");
      return;
  }
  throw Error(Errc::domain_error, "unknown algorithm");
}

auto pcsa_slot(HashValue h, int k) noexcept -> PcsaSlot {
  const auto hi = h.bits >> 32;
  const auto lo = static_cast<std::uint32_t>(h.bits);
  const auto bucket = static_cast<std::uint32_t>((hi * static_cast<std::uint64_t>(k)) >> 32);
  const int bit = lo == 0 ? kPcsaBitmapBits - 1 : __builtin_clz(lo);
  return {bucket, bit};
}

auto Sketch::empty(Algorithm algo, int param, std::uint64_t salt_fingerprint) -> Sketch {
  validate_params(algo, param);
  return Sketch(algo, param, salt_fingerprint, empty_state(algo, param));
}

auto Sketch::from_state(Algorithm algo, int param, std::uint64_t salt_fingerprint,
                        SketchState state) -> Sketch {
  try {
    validate_params(algo, param);
  } catch (const Error& e) {
    throw Error(Errc::format_error, e.what());
  }
  if (state.index() != expected_index(algo)) {
    throw Error(Errc::format_error, "state does not match algorithm");
  }
  std::visit(overloaded{
                 [&](const KmvState& s) {
                   if (s.hashes.size() > static_cast<std::size_t>(param)) {
                     throw Error(Errc::format_error, "KMV list longer than k");
                   }
                   if (std::adjacent_find(s.hashes.begin(), s.hashes.end(),
                                          std::greater_equal<>()) != s.hashes.end()) {
                     throw Error(Errc::format_error, "KMV list not strictly ascending");
                   }
                 },
                 [&](const PcsaState& s) {
                   if (s.bitmaps.size() != static_cast<std::size_t>(param)) {
                     throw Error(Errc::format_error, "PCSA bitmap count differs from k");
                   }
                 },
                 [&](const RegisterState& s) {
                   if (s.registers.size() != (std::size_t{1} << param)) {
                     throw Error(Errc::format_error, "register count differs from 2^p");
                   }
                   const auto cap = static_cast<std::uint8_t>(65 - param);
                   if (std::any_of(s.registers.begin(), s.registers.end(),
                                   [cap](std::uint8_t r) { return r > cap; })) {
                     throw Error(Errc::format_error, "register value above 65-p");
                   }
                 },
             },
             state);
  return Sketch(algo, param, salt_fingerprint, std::move(state));
}

auto Sketch::is_empty() const noexcept -> bool {
  return std::visit(overloaded{
                        [](const KmvState& s) { return s.hashes.empty(); },
                        [](const PcsaState& s) {
                          return std::all_of(s.bitmaps.begin(), s.bitmaps.end(),
                                             [](std::uint32_t b) { return b == 0; });
                        },
                        [](const RegisterState& s) {
                          return std::all_of(s.registers.begin(), s.registers.end(),
                                             [](std::uint8_t r) { return r == 0; });
                        },
                    },
                    state_);
}

auto Sketch::kmv_hashes() const -> std::span<const std::uint64_t> {
  if (const auto* s = std::get_if<KmvState>(&state_)) {
    return s->hashes;
  }
  throw Error(Errc::param_mismatch, "not a KMV sketch");
}

auto Sketch::pcsa_bitmaps() const -> std::span<const std::uint32_t> {
  if (const auto* s = std::get_if<PcsaState>(&state_)) {
    return s->bitmaps;
  }
  throw Error(Errc::param_mismatch, "not a PCSA sketch");
}

auto Sketch::registers() const -> std::span<const std::uint8_t> {
  if (const auto* s = std::get_if<RegisterState>(&state_)) {
    return s->registers;
  }
  throw Error(Errc::param_mismatch, "not a register sketch");
}

void Sketch::insert(HashValue h) {
  std::visit(overloaded{
                 [&](KmvState& s) {
                   auto& v = s.hashes;
                   const auto k = static_cast<std::size_t>(param_);
                   if (v.size() == k && h.bits >= v.back()) {
                     return;
                   }
                   const auto it = std::lower_bound(v.begin(), v.end(), h.bits);
                   if (it != v.end() && *it == h.bits) {
                     return;
                   }
                   v.insert(it, h.bits);
                   if (v.size() > k) {
                     v.pop_back();
                   }
                 },
                 [&](PcsaState& s) {
                   const auto slot = pcsa_slot(h, param_);
                   s.bitmaps[slot.bucket] |= std::uint32_t{1} << slot.bit;
                 },
                 [&](RegisterState& s) {
                   auto& reg = s.registers[h.bucket(param_)];
                   reg = std::max(reg, static_cast<std::uint8_t>(h.rho(param_)));
                 },
             },
             state_);
}

auto Sketch::ignores(HashValue h) const -> bool {
  return std::visit(overloaded{
                        [&](const KmvState& s) {
                          const auto& v = s.hashes;
                          if (v.size() == static_cast<std::size_t>(param_) && h.bits > v.back()) {
                            return true;
                          }
                          return std::binary_search(v.begin(), v.end(), h.bits);
                        },
                        [&](const PcsaState& s) {
                          const auto slot = pcsa_slot(h, param_);
                          return (s.bitmaps[slot.bucket] >> slot.bit & 1U) != 0;
                        },
                        [&](const RegisterState& s) {
                          return s.registers[h.bucket(param_)] >= h.rho(param_);
                        },
                    },
                    state_);
}

void Sketch::merge_from(const Sketch& other) {
  if (!same_shape(other)) {
    throw Error(Errc::param_mismatch,
                std::string(algorithm_name(algo_)) + "/" + std::to_string(param_) + " vs " +
                    std::string(algorithm_name(other.algo_)) + "/" + std::to_string(other.param_));
  }
  if (salt_fp_ != other.salt_fp_) {
    throw Error(Errc::salt_mismatch, "sketches were built with different salts");
  }
  std::visit(overloaded{
                 [&](KmvState& s) {
                   const auto& o = std::get<KmvState>(other.state_).hashes;
                   std::vector<std::uint64_t> merged;
                   merged.reserve(s.hashes.size() + o.size());
                   std::set_union(s.hashes.begin(), s.hashes.end(), o.begin(), o.end(),
                                  std::back_inserter(merged));
                   if (merged.size() > static_cast<std::size_t>(param_)) {
                     merged.resize(static_cast<std::size_t>(param_));
                   }
                   s.hashes = std::move(merged);
                 },
                 [&](PcsaState& s) {
                   kernels::or_bits(s.bitmaps, std::get<PcsaState>(other.state_).bitmaps);
                 },
                 [&](RegisterState& s) {
                   kernels::merge_max(s.registers, std::get<RegisterState>(other.state_).registers);
                 },
             },
             state_);
}

void check_salt(const Sketch& m, const Salt& salt) {
  if (m.salt_fingerprint() != salt.fingerprint()) {
    throw Error(Errc::salt_mismatch, "salt fingerprint does not match the sketch");
  }
}

auto add(Sketch m, std::string_view element, const Salt& salt) -> Sketch {
  check_salt(m, salt);
  m.insert(hash_element(element, salt));
  return m;
}

auto merge(const Sketch& a, const Sketch& b) -> Sketch {
  Sketch out = a;
  out.merge_from(b);
  return out;
}

auto is_ignored(const Sketch& m, std::string_view element, const Salt& salt) -> bool {
  check_salt(m, salt);
  return m.ignores(hash_element(element, salt));
}

auto bits_per_unit(Algorithm algo) noexcept -> int {
  switch (algo) {
    case Algorithm::kmv:
    case Algorithm::pcsa:
      return 32;
    case Algorithm::loglog:
      return 5;
    case Algorithm::hll:
      return 6;
  }
  return 0;
}

auto rse_constant(Algorithm algo) noexcept -> double {
  switch (algo) {
    case Algorithm::kmv:
      return 1.0;
    case Algorithm::pcsa:
      return 0.78;
    case Algorithm::loglog:
      return 1.30;
    case Algorithm::hll:
      return 1.04;
  }
  return 0.0;
}

auto theoretical_rse(Algorithm algo, std::uint64_t memory_bits) -> double {
  const auto width = static_cast<std::uint64_t>(bits_per_unit(algo));
  if (memory_bits == 0 || memory_bits % width != 0) {
    throw Error(Errc::invalid_memory, std::to_string(memory_bits) + " bits is not a positive multiple of " +
                                          std::to_string(width) + " for " +
                                          std::string(algorithm_name(algo)));
  }
  const auto k = static_cast<double>(memory_bits / width);
  return rse_constant(algo) / std::sqrt(k);
}

}  // namespace sketchpriv
