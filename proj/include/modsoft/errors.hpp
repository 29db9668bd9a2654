#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modsoft {

// Precondition violated by a caller (index out of range, dimension mismatch).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid plant / network / experiment parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor or feature shapes do not agree with the network they are fed to.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed dataset / model / log file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A module's bend reached the configuration singularity at |b| = pi.
class SaturationError : public std::runtime_error {
 public:
  SaturationError(std::size_t module, long step, double magnitude)
      : std::runtime_error("module " + std::to_string(module + 1) + " saturated (|b| = " +
                           std::to_string(magnitude) + ")" +
                           (step >= 0 ? " at step " + std::to_string(step) : std::string())),
        module_(module),
        step_(step),
        magnitude_(magnitude) {}
  std::size_t module() const { return module_; }
  long step() const { return step_; }
  double magnitude() const { return magnitude_; }

 private:
  std::size_t module_;
  long step_;
  double magnitude_;
};

// Non-finite loss or diverging training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace modsoft
