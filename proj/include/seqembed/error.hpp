#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace seqembed {

enum class ErrorKind {
  kDimensionMismatch,
  kZeroNorm,
  kUndefinedCorrelation,
  kEmptyInput,
  kParse,
  kOutOfRange,
  kNonFinite,
  kFormat,
  kVersion,
  kConsistency,
  kIncompatibleModels,
  kPrecondition,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// CLI can emit a structured error line and tests can assert on the category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace seqembed
