#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vqakit {

enum class ErrorCode {
  kEmptyCandidates,
  kDuplicateKey,
  kWrongAnswerCount,
  kDimensionMismatch,
  kInvalidParam,
  kShapeMismatch,
  kNonFiniteLoss,
  kEmptyQuestion,
  kSchema,
  kFormat,
  kIo,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyCandidates: return "EmptyCandidates";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kWrongAnswerCount: return "WrongAnswerCount";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidParam: return "InvalidParam";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyQuestion: return "EmptyQuestion";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library. The code selects the CLI exit status:
// I/O problems map to 4, everything else is a data error (3).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vqakit
