#include "sketchpriv/error.hpp"

namespace sketchpriv {

auto errc_name(Errc code) noexcept -> std::string_view {
  switch (code) {
    case Errc::invalid_element:
      return "InvalidElement";
    case Errc::invalid_argument:
      return "InvalidArgument";
    case Errc::invalid_memory:
      return "InvalidMemory";
    case Errc::salt_mismatch:
      return "SaltMismatch";
    case Errc::param_mismatch:
      return "ParamMismatch";
    case Errc::format_error:
      return "FormatError";
    case Errc::domain_error:
      return "DomainError";
    case Errc::unknown_key:
      return "UnknownKey";
    case Errc::duplicate_key:
      return "DuplicateKey";
    case Errc::unknown_sketch:
      return "UnknownSketch";
    case Errc::io_error:
      return "IoError";
    case Errc::policy_violation:
      return "PolicyViolation";
    case Errc::service_unavailable:
      return "ServiceUnavailable";
  }
  return "Unknown";
}

}  // namespace sketchpriv
