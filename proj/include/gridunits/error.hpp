// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridunits {

enum class Errc {
  file_not_found,
  unsupported_encoding,
  malformed_header,
  io_error,
  invalid_argument,
  empty_input,
  shape_mismatch,
  bad_magic,
  missing_tensor,
  unexpected_tensor,
  length_mismatch,
  non_finite,
  dimension_overflow,
  sample_rate_mismatch,
  silent_signal,
  too_short,
  out_of_range,
  config_error,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::file_not_found: return "file_not_found";
    case Errc::unsupported_encoding: return "unsupported_encoding";
    case Errc::malformed_header: return "malformed_header";
    case Errc::io_error: return "io_error";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::empty_input: return "empty_input";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::bad_magic: return "bad_magic";
    case Errc::missing_tensor: return "missing_tensor";
    case Errc::unexpected_tensor: return "unexpected_tensor";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::non_finite: return "non_finite";
    case Errc::dimension_overflow: return "dimension_overflow";
    case Errc::sample_rate_mismatch: return "sample_rate_mismatch";
    case Errc::silent_signal: return "silent_signal";
    case Errc::too_short: return "too_short";
    case Errc::out_of_range: return "out_of_range";
    case Errc::config_error: return "config_error";
  }
  return "unknown";
}

// All library failures are reported as Error; code() is the stable part,
// what() carries the human-readable context (paths, tensor names).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  Errc code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gridunits
