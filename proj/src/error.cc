#include "cccm/error.h"

namespace cccm {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfiguration: return "InvalidConfiguration";
    case ErrorCode::kInvalidModel: return "InvalidModel";
    case ErrorCode::kInvalidStep: return "InvalidStep";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kEstimationFailure: return "EstimationFailure";
    case ErrorCode::kOutOfHorizon: return "OutOfHorizon";
    case ErrorCode::kNoCapturePlan: return "NoCapturePlan";
    case ErrorCode::kSafetyStop: return "SafetyStop";
    case ErrorCode::kInvalidDim: return "InvalidDim";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kInvalidTrack: return "InvalidTrack";
    case ErrorCode::kSamplingExhausted: return "SamplingExhausted";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cccm
