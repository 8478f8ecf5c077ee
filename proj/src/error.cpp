#include "gcm/error.hpp"

namespace gcm {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSelfLoop: return "self_loop";
    case ErrorCode::kDuplicateEdge: return "duplicate_edge";
    case ErrorCode::kDuplicateNode: return "duplicate_node";
    case ErrorCode::kCycle: return "cycle";
    case ErrorCode::kUnknownNode: return "unknown_node";
    case ErrorCode::kEmptyFile: return "empty_file";
    case ErrorCode::kRaggedRow: return "ragged_row";
    case ErrorCode::kDuplicateHeader: return "duplicate_header";
    case ErrorCode::kMissingValue: return "missing_value";
    case ErrorCode::kUnknownColumn: return "unknown_column";
    case ErrorCode::kTypeMismatch: return "type_mismatch";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kInsufficientRows: return "insufficient_rows";
    case ErrorCode::kUnseenCategory: return "unseen_category";
    case ErrorCode::kCardinality: return "cardinality";
    case ErrorCode::kRoleMismatch: return "role_mismatch";
    case ErrorCode::kNotFitted: return "not_fitted";
    case ErrorCode::kSchemaVersion: return "schema_version";
    case ErrorCode::kCorruptPayload: return "corrupt_payload";
    case ErrorCode::kNonInvertible: return "non_invertible";
    case ErrorCode::kArityTooLarge: return "arity_too_large";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_numeric_failure(ErrorCode code) {
  return code == ErrorCode::kNonFinite;
}

}  // namespace gcm
