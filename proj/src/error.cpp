#include "permsig/error.hpp"

namespace permsig {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateVisit: return "DuplicateVisit";
    case ErrorCode::SchemaOverlap: return "SchemaOverlap";
    case ErrorCode::SchemaIncomplete: return "SchemaIncomplete";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyRowSet: return "EmptyRowSet";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UndefinedMetric: return "UndefinedMetric";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::NotAPermutation: return "NotAPermutation";
    case ErrorCode::MismatchedRun: return "MismatchedRun";
    case ErrorCode::EmptyNull: return "EmptyNull";
    case ErrorCode::InfeasiblePlan: return "InfeasiblePlan";
    case ErrorCode::DegenerateSubset: return "DegenerateSubset";
    case ErrorCode::InvalidSubSchema: return "InvalidSubSchema";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace permsig
