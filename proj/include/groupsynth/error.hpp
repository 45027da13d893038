#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace groupsynth {

enum class ErrorKind {
  SchemaMismatch,
  ParseError,
  BoundsViolation,
  InvalidSpec,
  InsufficientGroup,
  ConstraintInfeasible,
  EmptyExamples,
  TransportError,
  AuthError,
  MalformedResponse,
  RangeViolation,
  BackendExhausted,
  TooFewExamples,
  TooFewRows,
  TooFewPoints,
  SingleGroup,
  SingleClass,
  NoPositives,
  MissingSynthetic,
  DimensionMismatch,
  SkippedCell,
  EmptyReference,
  ConfigError,
  IoError,
};

const char* to_string(ErrorKind kind);

// Base for every error the library raises. `kind()` is what callers switch on;
// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CSV cell that failed to parse. Rows are 1-based data rows (header excluded).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& detail);

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class InsufficientGroupError : public Error {
 public:
  InsufficientGroupError(std::string group, std::size_t available, std::size_t required);

  const std::string& group() const noexcept { return group_; }
  std::size_t available() const noexcept { return available_; }
  std::size_t required() const noexcept { return required_; }
  std::size_t shortfall() const noexcept { return required_ - available_; }

 private:
  std::string group_;
  std::size_t available_;
  std::size_t required_;
};

// Non-2xx HTTP status or network failure (status 0).
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& detail)
      : Error(ErrorKind::TransportError, detail), status_(status) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return status_ == 0 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

// Generation response that does not match the schema. `key` is the first
// offending column, `index` the offending array position when there is one.
class MalformedResponseError : public Error {
 public:
  MalformedResponseError(std::string key, long index, const std::string& detail,
                         ErrorKind kind = ErrorKind::MalformedResponse);

  const std::string& key() const noexcept { return key_; }
  long index() const noexcept { return index_; }

 private:
  std::string key_;
  long index_;
};

}  // namespace groupsynth
