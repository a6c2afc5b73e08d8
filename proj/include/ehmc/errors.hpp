#pragma once

#include <stdexcept>
#include <string>

namespace ehmc {

/// Invalid configuration or argument values (bad sizes, out-of-range knobs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or unusable input data (CSV parse failures, bad columns).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A target model produced unusable values (non-finite potential/gradient,
/// failed adaptation).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A diagnostic is undefined for the given input (constant sequence, empty
/// sample).
class StatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical blow-up along a trajectory. Carries the 1-based index of the
/// integrator step that failed.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace ehmc
