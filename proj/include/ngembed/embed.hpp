#pragma once
// Post-step embedding onto the sampled constrained manifold
//   min 1/2 ||eta - theta_tilde||^2  s.t.  c(eta) = 0,
// solved with the simplified-Newton Lagrange iteration that keeps the
// constraint Jacobian frozen at theta_tilde.

#include <string>
#include <vector>

#include "ngembed/models.hpp"

namespace ngembed {

struct EmbedOptions {
  double tol = 1e-12;  // on ||c||_inf
  int kmax = 50;
  /// Declare stagnation when ||c|| has not halved over this many iterations.
  int stall_window = 5;
  double stall_factor = 0.5;
  /// Reciprocal condition threshold for c' c'^T.
  double rcond_min = 1e-14;
};

struct EmbedReport {
  ParamVector theta;
  int iterations = 0;
  double final_residual = 0.0;  // ||c(theta)||_inf
  bool converged = false;
};

/// Nonconvergence that also hands back the best iterate seen.
class EmbedError : public NonconvergenceError {
 public:
  EmbedError(const std::string& what, double residual, int iterations, ParamVector best)
      : NonconvergenceError(what, residual, iterations), best_(std::move(best)) {}
  const ParamVector& best() const { return best_; }

 private:
  ParamVector best_;
};

/// c_i(theta) = q_hat_i(theta) - target_i.
Vec constraint_residual(const ParamVector& theta, const std::vector<Quantity>& qs,
                        const Parametrization& net, const SampleSet& S_M);

/// Rows are the parameter gradients of the sampled quantities.
Mat constraint_jacobian(const ParamVector& theta, const std::vector<Quantity>& qs,
                        const Parametrization& net, const SampleSet& S_M);

/// Throws NonconvergenceError (carrying the best residual) when the iteration
/// stalls, exceeds kmax or c' c'^T is numerically singular.
EmbedReport embed(const ParamVector& theta_tilde, const std::vector<Quantity>& qs,
                  const Parametrization& net, const SampleSet& S_M, const EmbedOptions& opts = {});

}  // namespace ngembed
