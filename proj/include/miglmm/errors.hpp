#pragma once

#include <stdexcept>
#include <string>

namespace miglmm {

// Error families map onto CLI exit codes (see tools/miglmm.cpp).

/// Bad argument to a numerical routine (domain violation, bad dimension).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The model is not defined at the requested parameters, e.g. a square-root
/// link whose linear predictor cannot absorb the random-effect variance.
class ModelUndefined : public std::domain_error {
 public:
  ModelUndefined(const std::string& what, double kappa, double variance)
      : std::domain_error(what), kappa_(kappa), variance_(variance) {}
  double kappa() const noexcept { return kappa_; }
  double variance() const noexcept { return variance_; }

 private:
  double kappa_;
  double variance_;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace miglmm
