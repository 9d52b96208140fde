#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eventfeat {

enum class ErrorCode {
  kTruncatedRecord,
  kCoordinateOutOfRange,
  kShapeMismatch,
  kNonMonotonicTimestamps,
  kTimestampOverflow,
  kOutOfBounds,
  kInsufficientData,
  kInvalidArgument,
  kEmptyInput,
  kDimensionMismatch,
  kNotNormalized,
  kSingularGram,
  kSingularFactor,
  kDegenerateLabels,
  kTooFewExamples,
  kEmptyLattice,
  kConfig,
  kMissingDataset,
  kFormat,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every library failure is reported as an Error carrying a machine-readable
// code; the CLI maps codes onto process exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eventfeat
