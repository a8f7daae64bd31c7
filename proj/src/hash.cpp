#include "sketchpriv/hash.hpp"

#include <sodium.h>

#include <fstream>
#include <sstream>

#include "sketchpriv/error.hpp"

namespace sketchpriv {

namespace {

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) {
    throw Error(Errc::io_error, "libsodium initialisation failed");
  }
}

auto load_le64(const std::uint8_t* p) noexcept -> std::uint64_t {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | p[i];
  }
  return v;
}

constexpr std::string_view kUnsaltedKey = "sketchpriv.unsalted.v1";
constexpr std::string_view kSipPersonal = "sketchpriv/sip";
constexpr std::string_view kFingerprintPersonal = "sketchpriv/fp";

// BLAKE2b(context || key) truncated to out.size() bytes.
void derive(std::string_view context, std::span<const std::uint8_t> key,
            std::span<std::uint8_t> out) {
  crypto_generichash_state st;
  std::array<std::uint8_t, crypto_generichash_BYTES> digest{};
  crypto_generichash_init(&st, nullptr, 0, digest.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(context.data()),
                            context.size());
  crypto_generichash_update(&st, key.data(), key.size());
  crypto_generichash_final(&st, digest.data(), digest.size());
  std::copy_n(digest.begin(), out.size(), out.begin());
}

}  // namespace

auto to_hex(std::span<const std::uint8_t> bytes) -> std::string {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (const auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

auto from_hex(std::string_view hex) -> std::vector<std::uint8_t> {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) {
    throw Error(Errc::invalid_argument, "hex string has odd length");
  }
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error(Errc::invalid_argument, "invalid hex digit");
    }
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

auto Salt::from_key(std::span<const std::uint8_t> key) -> Salt {
  ensure_sodium();
  if (key.size() < kMinKeyBytes) {
    throw Error(Errc::invalid_argument,
                "salt key must be at least " + std::to_string(kMinKeyBytes) + " bytes");
  }
  Salt s;
  s.key_.assign(key.begin(), key.end());
  derive(kSipPersonal, key, s.siphash_key_);
  std::array<std::uint8_t, 8> fp{};
  derive(kFingerprintPersonal, key, fp);
  s.fingerprint_ = load_le64(fp.data());
  return s;
}

auto Salt::from_hex(std::string_view hex) -> Salt {
  const auto bytes = sketchpriv::from_hex(hex);
  return from_key(bytes);
}

auto Salt::generate(std::size_t key_bytes) -> Salt {
  ensure_sodium();
  std::vector<std::uint8_t> key(std::max(key_bytes, kMinKeyBytes));
  randombytes_buf(key.data(), key.size());
  return from_key(key);
}

auto Salt::unsalted() -> Salt {
  static const Salt s = from_key(std::span(
      reinterpret_cast<const std::uint8_t*>(kUnsaltedKey.data()), kUnsaltedKey.size()));
  return s;
}

auto Salt::load(const std::string& path) -> Salt {
  std::ifstream in(path);
  if (!in) {
    throw Error(Errc::io_error, "cannot read salt file " + path);
  }
  std::string hex;
  in >> hex;
  return from_hex(hex);
}

void Salt::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw Error(Errc::io_error, "cannot write salt file " + path);
  }
  out << to_hex() << '\n';
  if (!out) {
    throw Error(Errc::io_error, "short write to salt file " + path);
  }
}

auto Salt::to_hex() const -> std::string { return sketchpriv::to_hex(key_); }

auto Salt::hash(std::span<const std::uint8_t> element) const -> HashValue {
  if (element.empty()) {
    throw Error(Errc::invalid_element, "empty element");
  }
  std::array<std::uint8_t, crypto_shorthash_siphash24_BYTES> out{};
  crypto_shorthash_siphash24(out.data(), element.data(), element.size(), siphash_key_.data());
  // SipHash emits little-endian; byte 0 becomes the least significant byte.
  return HashValue{load_le64(out.data())};
}

auto Salt::hash(std::string_view element) const -> HashValue {
  return hash(std::span(reinterpret_cast<const std::uint8_t*>(element.data()), element.size()));
}

auto hash_element(std::string_view element, const Salt& salt) -> HashValue {
  return salt.hash(element);
}

}  // namespace sketchpriv
