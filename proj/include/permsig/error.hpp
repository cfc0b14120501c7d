#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace permsig {

// Every failure the library reports carries one of these codes so the CLI can
// map it onto an exit status.
enum class ErrorCode {
  // dataset
  MissingColumn,
  NonFiniteValue,
  DuplicateVisit,
  SchemaOverlap,
  SchemaIncomplete,
  InvalidSchema,
  ParseError,
  EmptyRowSet,
  DimensionMismatch,
  // synth
  InvalidConfig,
  // models
  EmptySequence,
  StaleCache,
  ShapeMismatch,
  SingleClassTrainingSet,
  NonFiniteLoss,
  // metrics
  LengthMismatch,
  UndefinedMetric,
  // crossval
  TooFewSubjects,
  // permeng
  UnknownCategory,
  NotAPermutation,
  MismatchedRun,
  EmptyNull,
  InfeasiblePlan,
  // analysis
  DegenerateSubset,
  InvalidSubSchema,
  // io
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace permsig
