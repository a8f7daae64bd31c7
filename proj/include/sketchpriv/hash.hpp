#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sketchpriv {

// 64-bit element hash. The top p bits select a bucket; rho is the 1-based
// position of the leftmost 1-bit in the remaining 64-p bits, or 65-p when
// those bits are all zero.
struct HashValue {
  std::uint64_t bits = 0;

  [[nodiscard]] constexpr auto bucket(int p) const noexcept -> std::uint32_t {
    return static_cast<std::uint32_t>(bits >> (64 - p));
  }

  [[nodiscard]] constexpr auto rho(int p) const noexcept -> int {
    const std::uint64_t rest = bits << p;
    if (rest == 0) {
      return 65 - p;
    }
    return __builtin_clzll(rest) + 1;
  }

  friend constexpr auto operator==(HashValue, HashValue) noexcept -> bool = default;
  friend constexpr auto operator<=>(HashValue, HashValue) noexcept = default;
};

// Secret key mixed into every element hash. Only the fingerprint travels
// with sketches; the key itself stays with whoever builds them.
class Salt {
 public:
  static constexpr std::size_t kMinKeyBytes = 16;

  // Throws InvalidArgument when the key is shorter than kMinKeyBytes.
  static auto from_key(std::span<const std::uint8_t> key) -> Salt;
  static auto from_hex(std::string_view hex) -> Salt;
  // Fresh key from the OS CSPRNG.
  static auto generate(std::size_t key_bytes = 32) -> Salt;
  // Well-known fixed key used when no secret is configured.
  static auto unsalted() -> Salt;

  static auto load(const std::string& path) -> Salt;
  void save(const std::string& path) const;

  [[nodiscard]] auto fingerprint() const noexcept -> std::uint64_t { return fingerprint_; }
  [[nodiscard]] auto key() const noexcept -> std::span<const std::uint8_t> { return key_; }
  [[nodiscard]] auto to_hex() const -> std::string;

  [[nodiscard]] auto hash(std::span<const std::uint8_t> element) const -> HashValue;
  [[nodiscard]] auto hash(std::string_view element) const -> HashValue;

  friend auto operator==(const Salt& a, const Salt& b) -> bool { return a.key_ == b.key_; }

 private:
  Salt() = default;

  std::vector<std::uint8_t> key_;
  std::array<std::uint8_t, 16> siphash_key_{};
  std::uint64_t fingerprint_ = 0;
};

// Keyed SipHash-2-4 of the element. Throws InvalidElement on empty input.
auto hash_element(std::string_view element, const Salt& salt) -> HashValue;

auto to_hex(std::span<const std::uint8_t> bytes) -> std::string;
auto from_hex(std::string_view hex) -> std::vector<std::uint8_t>;

}  // namespace sketchpriv
