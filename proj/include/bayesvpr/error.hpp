#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bayesvpr {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kDegenerateSpread,
  kDegenerateMean,
  kZeroPosterior,
  kNotConverged,
  kConfigInvalid,
  kParseError,
  kCountMismatch,
  kTraverseTooShort,
  kIndexOutOfRange,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

/// Library-wide exception. Every failure raised by bayesvpr carries a code so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateSpread: return "DegenerateSpread";
    case ErrorCode::kDegenerateMean: return "DegenerateMean";
    case ErrorCode::kZeroPosterior: return "ZeroPosterior";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kTraverseTooShort: return "TraverseTooShort";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace bayesvpr
