#pragma once

#include <stdexcept>
#include <string>

namespace srunit {

/// Base class for every error raised by the library. `category()` is a stable,
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error("index", what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error("invariant", what) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what) : Error("generation", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error("metric", what) {}
};

}  // namespace srunit
