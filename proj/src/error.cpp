#include "corrsim/error.hpp"

namespace corrsim {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotMovable: return "NotMovable";
    case ErrorCode::kDegenerateRadius: return "DegenerateRadius";
    case ErrorCode::kUnknownPart: return "UnknownPart";
    case ErrorCode::kInvalidObject: return "InvalidObject";
    case ErrorCode::kAssetParse: return "AssetParse";
    case ErrorCode::kInvalidCamera: return "InvalidCamera";
    case ErrorCode::kEmptyScene: return "EmptyScene";
    case ErrorCode::kBackgroundPixel: return "BackgroundPixel";
    case ErrorCode::kNotOnSurface: return "NotOnSurface";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidDirection: return "InvalidDirection";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kCollinearTrajectory: return "CollinearTrajectory";
    case ErrorCode::kNoMovement: return "NoMovement";
    case ErrorCode::kDegenerateChords: return "DegenerateChords";
    case ErrorCode::kMovablePart: return "MovablePart";
    case ErrorCode::kNoMasks: return "NoMasks";
    case ErrorCode::kNoEstimate: return "NoEstimate";
    case ErrorCode::kPolicyFailure: return "PolicyFailure";
    case ErrorCode::kNotUnit: return "NotUnit";
    case ErrorCode::kDegenerateZero: return "DegenerateZero";
    case ErrorCode::kNoMovableVisible: return "NoMovableVisible";
    case ErrorCode::kProtocolViolation: return "ProtocolViolation";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kConnection: return "Connection";
    case ErrorCode::kExhaustedBudget: return "ExhaustedBudget";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

}  // namespace corrsim
