#pragma once

#include <stdexcept>
#include <string>

namespace nlgad {

/// Broad failure category; the CLI maps each one to a process exit code.
enum class ErrorKind {
  config,    // invalid hyperparameters or arguments (exit 2)
  data,      // unreadable or malformed input data (exit 3)
  internal,  // violated internal invariant (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Not enough eligible nodes to satisfy an injection request.
struct CapacityError : ConfigError {
  explicit CapacityError(const std::string& what) : ConfigError("capacity: " + what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct ParseError : DataError {
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct RangeError : DataError {
  explicit RangeError(const std::string& what) : DataError("range: " + what) {}
};

struct ShapeError : DataError {
  explicit ShapeError(const std::string& what) : DataError("shape: " + what) {}
};

/// A metric that needs both classes was asked for on single-class labels.
struct UndefinedMetricError : DataError {
  explicit UndefinedMetricError(const std::string& what) : DataError(what) {}
};

/// Checkpoint produced under a different configuration.
struct HashMismatchError : ConfigError {
  explicit HashMismatchError(const std::string& what) : ConfigError(what) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& what) : Error(ErrorKind::internal, what) {}
};

/// Tensor operands with incompatible shapes.
struct DimensionError : InternalError {
  explicit DimensionError(const std::string& what) : InternalError("dimension mismatch: " + what) {}
};

}  // namespace nlgad
