#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rpsu {

// Invalid or inconsistent tensor / layer shapes.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed binary input (wrong magic number and the like).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// File shorter than its header promises.
struct LengthError : std::runtime_error {
  explicit LengthError(const std::string& what) : std::runtime_error(what) {}
};

// Two inputs that must agree do not (e.g. image vs. label counts).
struct ConsistencyError : std::runtime_error {
  explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration (flag values, TrainConfig bounds).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Batch statistics undefined: batch size < 2 in train mode.
struct DegenerateBatchError : std::runtime_error {
  explicit DegenerateBatchError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or gradient; carries the offending parameter name.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string param, const std::string& what)
      : std::runtime_error(what), param_(std::move(param)) {}
  const std::string& param() const noexcept { return param_; }

 private:
  std::string param_;
};

}  // namespace rpsu
