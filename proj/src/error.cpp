#include "prga/error.hpp"

namespace prga {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::BadFormat: return "BadFormat";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::GridTooFine: return "GridTooFine";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::AllMasked: return "AllMasked";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::ClassCoverage: return "ClassCoverage";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::GraphNotRecorded: return "GraphNotRecorded";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InsufficientItems: return "InsufficientItems";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

}  // namespace prga
