#pragma once

#include <stdexcept>
#include <string>

namespace gcm {

enum class ErrorCode {
  kParse,
  kSelfLoop,
  kDuplicateEdge,
  kDuplicateNode,
  kCycle,
  kUnknownNode,
  kEmptyFile,
  kRaggedRow,
  kDuplicateHeader,
  kMissingValue,
  kUnknownColumn,
  kTypeMismatch,
  kEmptyInput,
  kInsufficientRows,
  kUnseenCategory,
  kCardinality,
  kRoleMismatch,
  kNotFitted,
  kSchemaVersion,
  kCorruptPayload,
  kNonInvertible,
  kArityTooLarge,
  kNonFinite,
  kDimensionMismatch,
  kInvalidArgument,
  kIo,
};

const char* error_code_name(ErrorCode code);

// Numeric failures (as opposed to bad inputs) map to a distinct CLI exit code.
bool is_numeric_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gcm
