#pragma once

#include <stdexcept>
#include <string>

namespace re3val {

/// Base of every error raised by the library. The CLI maps the three
/// families below onto exit codes 2, 3 and 4.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input, bad configuration, violated preconditions.
class ValidationError : public Error {
  public:
    using Error::Error;
};

/// A pipeline stage ran before the artifacts it needs exist.
class DependencyError : public Error {
  public:
    using Error::Error;
};

/// Failures that happen while computing (numerics, search).
class RuntimeError : public Error {
  public:
    using Error::Error;
};

class ParseError : public ValidationError {
  public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class DuplicateKeyError : public ValidationError {
  public:
    explicit DuplicateKeyError(const std::string& key)
        : ValidationError("duplicate key: " + key), key_(key) {}
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

class InvalidPrefixError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class ConstraintViolation : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class UndefinedMetricError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

class TruncationError : public RuntimeError {
  public:
    using RuntimeError::RuntimeError;
};

class NonFiniteLossError : public RuntimeError {
  public:
    using RuntimeError::RuntimeError;
};

class NoMatchError : public RuntimeError {
  public:
    using RuntimeError::RuntimeError;
};

} // namespace re3val
