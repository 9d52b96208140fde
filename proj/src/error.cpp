#include "eventfeat/error.hpp"

namespace eventfeat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTruncatedRecord: return "TruncatedRecord";
    case ErrorCode::kCoordinateOutOfRange: return "CoordinateOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::kTimestampOverflow: return "TimestampOverflow";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotNormalized: return "NotNormalized";
    case ErrorCode::kSingularGram: return "SingularGram";
    case ErrorCode::kSingularFactor: return "SingularFactor";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kTooFewExamples: return "TooFewExamples";
    case ErrorCode::kEmptyLattice: return "EmptyLattice";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kMissingDataset: return "MissingDataset";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace eventfeat
