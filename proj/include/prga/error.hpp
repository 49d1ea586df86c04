#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prga {

enum class ErrorKind {
  BadMagic,
  TruncatedFile,
  LabelOutOfRange,
  NonFiniteValue,
  IoError,
  BadFormat,
  ZeroVector,
  GridTooFine,
  DimMismatch,
  AllMasked,
  EmptyInput,
  ClassCoverage,
  NotNormalized,
  GraphNotRecorded,
  NonFiniteLoss,
  InsufficientItems,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library. what() always starts with the kind
// name, e.g. "BadMagic: expected EBK1 at byte offset 0".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace prga
