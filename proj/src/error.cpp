#include "seqembed/error.hpp"

namespace seqembed {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kZeroNorm: return "zero_norm";
    case ErrorKind::kUndefinedCorrelation: return "undefined_correlation";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kOutOfRange: return "out_of_range";
    case ErrorKind::kNonFinite: return "non_finite";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kIncompatibleModels: return "incompatible_models";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace seqembed
