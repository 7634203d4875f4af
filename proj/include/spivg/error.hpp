#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spivg {

enum class ErrorCode {
  kShapeMismatch,
  kInvalidArgument,
  kSequenceTooShort,
  kNotFound,
  kIo,
  kFormat,
  kConfig,
  kDivergence,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kSequenceTooShort: return "sequence_too_short";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kConfig: return "config_error";
    case ErrorCode::kDivergence: return "divergence";
  }
  return "unknown";
}

/// Every failure raised by the library. The code is stable and machine-readable;
/// the message carries the human context (op name, shapes, video id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spivg
