#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace acton {

enum class ErrorCode {
  // input / data
  EmptyInput,
  MalformedRow,
  DuplicateTimestamp,
  UnknownTaskColumn,
  OutOfRangeClass,
  IndivisibleLength,
  DimensionMismatch,
  NoSymbolVectors,
  PreconditionViolation,
  InfeasibleCorrelation,
  InsufficientData,
  AllZeroCounts,
  GranularityMismatch,
  UnknownSegment,
  IdOutOfRange,
  ShapeMismatch,
  WindowTooLarge,
  BatchTooSmall,
  SingleClassTrainingSet,
  LengthMismatch,
  LabelOutOfRange,
  AlphaSumViolation,
  NoLabeledSubjects,
  // persistence
  HeaderMismatch,
  TruncatedFile,
  VersionMismatch,
  DigestMismatch,
  IoError,
  // configuration / usage
  InvalidConfig,
  // numerics
  NumericFailure,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace acton
