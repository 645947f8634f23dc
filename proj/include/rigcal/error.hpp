#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rigcal {

enum class ErrorCode {
  kNonPositiveDepth,
  kRayParallelToPlane,
  kDegenerateBasis,
  kMissingJoints,
  kDegenerateConfiguration,
  kNegativeFocalSquared,
  kInsufficientData,
  kCalibrationFailed,
  kEmptyInput,
  kEmptySignal,
  kEmptyCloud,
  kTooFewCorrespondences,
  kNoSharedObservations,
  kFrustumExhausted,
  kUnknownTarget,
  kMismatchedRigs,
  kParseError,
  kSchemaError,
  kEmptySequence,
  kIoError,
  kInvalidArgument,
  kInvariantViolation,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rigcal
