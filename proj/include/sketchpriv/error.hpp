#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sketchpriv {

enum class Errc {
  invalid_element,
  invalid_argument,
  invalid_memory,
  salt_mismatch,
  param_mismatch,
  format_error,
  domain_error,
  unknown_key,
  duplicate_key,
  unknown_sketch,
  io_error,
  policy_violation,
  service_unavailable,
};

[[nodiscard]] auto errc_name(Errc code) noexcept -> std::string_view;

// All library failures are reported through this exception; code() is stable
// and is what the CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  [[nodiscard]] auto code() const noexcept -> Errc { return code_; }

 private:
  Errc code_;
};

}  // namespace sketchpriv
