#include "acton/error.hpp"

namespace acton {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateTimestamp: return "DuplicateTimestamp";
    case ErrorCode::UnknownTaskColumn: return "UnknownTaskColumn";
    case ErrorCode::OutOfRangeClass: return "OutOfRangeClass";
    case ErrorCode::IndivisibleLength: return "IndivisibleLength";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoSymbolVectors: return "NoSymbolVectors";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::InfeasibleCorrelation: return "InfeasibleCorrelation";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::AllZeroCounts: return "AllZeroCounts";
    case ErrorCode::GranularityMismatch: return "GranularityMismatch";
    case ErrorCode::UnknownSegment: return "UnknownSegment";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::AlphaSumViolation: return "AlphaSumViolation";
    case ErrorCode::NoLabeledSubjects: return "NoLabeledSubjects";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace acton
