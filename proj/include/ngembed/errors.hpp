#pragma once

#include <stdexcept>
#include <string>

namespace ngembed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions or invalid construction arguments.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered or a linear system that cannot be solved.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Simplified-Newton embedding failed; carries the best residual reached.
class NonconvergenceError : public Error {
 public:
  NonconvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Initial-condition fit did not reach the RMSE threshold.
class FitError : public Error {
 public:
  FitError(const std::string& what, double rmse) : Error(what), rmse_(rmse) {}
  double rmse() const { return rmse_; }

 private:
  double rmse_;
};

}  // namespace ngembed
