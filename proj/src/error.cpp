#include "groupsynth/error.hpp"

namespace groupsynth {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::BoundsViolation: return "BoundsViolation";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InsufficientGroup: return "InsufficientGroup";
    case ErrorKind::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorKind::EmptyExamples: return "EmptyExamples";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::AuthError: return "AuthError";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::RangeViolation: return "RangeViolation";
    case ErrorKind::BackendExhausted: return "BackendExhausted";
    case ErrorKind::TooFewExamples: return "TooFewExamples";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::SingleGroup: return "SingleGroup";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::MissingSynthetic: return "MissingSynthetic";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SkippedCell: return "SkippedCell";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

ParseError::ParseError(std::size_t row, std::string column, const std::string& detail)
    : Error(ErrorKind::ParseError,
            "row " + std::to_string(row) + ", column '" + column + "': " + detail),
      row_(row),
      column_(std::move(column)) {}

InsufficientGroupError::InsufficientGroupError(std::string group, std::size_t available,
                                               std::size_t required)
    : Error(ErrorKind::InsufficientGroup,
            "group '" + group + "' has " + std::to_string(available) + " rows, " +
                std::to_string(required) + " required (short by " +
                std::to_string(required - available) + ")"),
      group_(std::move(group)),
      available_(available),
      required_(required) {}

MalformedResponseError::MalformedResponseError(std::string key, long index,
                                               const std::string& detail, ErrorKind kind)
    : Error(kind, index >= 0 ? "key '" + key + "' index " + std::to_string(index) + ": " + detail
                             : "key '" + key + "': " + detail),
      key_(std::move(key)),
      index_(index) {}

}  // namespace groupsynth
