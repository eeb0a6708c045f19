#include "dflbench/error.hpp"

namespace dflbench {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularMatrix: return "SingularMatrix";
    case ErrorCode::kInvalidScale: return "InvalidScale";
    case ErrorCode::kInvalidParam: return "InvalidParam";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kIngestError: return "IngestError";
    case ErrorCode::kPartialDay: return "PartialDay";
    case ErrorCode::kInfeasibleDiversity: return "InfeasibleDiversity";
    case ErrorCode::kInfeasibleInstance: return "InfeasibleInstance";
    case ErrorCode::kNodeBudgetExceeded: return "NodeBudgetExceeded";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kEmptyCache: return "EmptyCache";
    case ErrorCode::kSingularKkt: return "SingularKkt";
    case ErrorCode::kZeroDenominator: return "ZeroDenominator";
    case ErrorCode::kMissingTargets: return "MissingTargets";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnsupported: return "Unsupported";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dflbench
