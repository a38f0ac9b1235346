#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrsim {

enum class ErrorCode {
  kNotMovable,
  kDegenerateRadius,
  kUnknownPart,
  kInvalidObject,
  kAssetParse,
  kInvalidCamera,
  kEmptyScene,
  kBackgroundPixel,
  kNotOnSurface,
  kDimensionMismatch,
  kInvalidDirection,
  kInvalidParams,
  kTooShort,
  kCollinearTrajectory,
  kNoMovement,
  kDegenerateChords,
  kMovablePart,
  kNoMasks,
  kNoEstimate,
  kPolicyFailure,
  kNotUnit,
  kDegenerateZero,
  kNoMovableVisible,
  kProtocolViolation,
  kParseFailure,
  kConnection,
  kExhaustedBudget,
  kIo,
  kConfig,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace corrsim
