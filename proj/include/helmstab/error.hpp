#pragma once

#include <stdexcept>
#include <string>

namespace helmstab {

/// Bad caller input: sizes, ranges, mismatched partitions or acquisitions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization, residual or eigensolver failures.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// omega^2 sits on (or within 1e-8 relative of) a discrete eigenvalue.
class NearResonance : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// omega^2 is outside every admissible window and no override was given.
class WindowViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two identical models passed to the stability estimator.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data difference too small relative to the data scale to give a ratio.
class IllConditioned : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config parse or schema error. line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace helmstab
