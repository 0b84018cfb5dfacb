#ifndef CCCM_ERROR_H_
#define CCCM_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace cccm {

enum class ErrorCode {
  kInvalidConfiguration,
  kInvalidModel,
  kInvalidStep,
  kNumericalFailure,
  kEstimationFailure,
  kOutOfHorizon,
  kNoCapturePlan,
  kSafetyStop,
  kInvalidDim,
  kTrainingDiverged,
  kInvalidTrack,
  kSamplingExhausted,
  kParseError,
  kConfigError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cccm

#endif  // CCCM_ERROR_H_
