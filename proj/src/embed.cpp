#include "ngembed/embed.hpp"

#include <cmath>
#include <sstream>

namespace ngembed {

namespace {

Vec residual_of(const QuantityEval& ev, const std::vector<Quantity>& qs) {
  Vec c = ev.values;
  for (std::size_t i = 0; i < qs.size(); ++i) c[static_cast<Eigen::Index>(i)] -= qs[i].target;
  return c;
}

void require_targets(const std::vector<Quantity>& qs) {
  for (const Quantity& q : qs)
    if (std::isnan(q.target)) throw Error("embed: quantity '" + q.name + "' has no frozen target");
}

}  // namespace

Vec constraint_residual(const ParamVector& theta, const std::vector<Quantity>& qs,
                        const Parametrization& net, const SampleSet& S_M) {
  require_targets(qs);
  if (qs.empty()) return Vec();
  return residual_of(evaluate_quantities(qs, net, theta, S_M, false), qs);
}

Mat constraint_jacobian(const ParamVector& theta, const std::vector<Quantity>& qs,
                        const Parametrization& net, const SampleSet& S_M) {
  if (qs.empty()) return Mat(0, net.num_params());
  return evaluate_quantities(qs, net, theta, S_M, true).jacobian;
}

EmbedReport embed(const ParamVector& theta_tilde, const std::vector<Quantity>& qs,
                  const Parametrization& net, const SampleSet& S_M, const EmbedOptions& opts) {
  require_targets(qs);
  EmbedReport rep;
  rep.theta = theta_tilde;
  if (qs.empty()) {
    rep.converged = true;
    return rep;
  }

  const QuantityEval at_tilde = evaluate_quantities(qs, net, theta_tilde, S_M, true);
  const Mat& C = at_tilde.jacobian;  // frozen for all iterations
  const Mat gram = C * C.transpose();
  Eigen::LDLT<Mat> ldlt(gram);
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  Vec r = residual_of(at_tilde, qs);
  double rnorm = r.lpNorm<Eigen::Infinity>();
  if (!(rcond > opts.rcond_min)) {
    std::ostringstream os;
    os << "embed: c' c'^T is singular (rcond " << rcond << ")";
    throw EmbedError(os.str(), rnorm, 0, theta_tilde);
  }

  Vec lambda = Vec::Zero(static_cast<Eigen::Index>(qs.size()));
  ParamVector best = theta_tilde;
  double best_norm = rnorm;
  std::vector<double> history{rnorm};

  for (int k = 1; k <= opts.kmax; ++k) {
    lambda -= ldlt.solve(r);
    ParamVector eta = theta_tilde;
    eta.noalias() += C.transpose() * lambda;
    r = constraint_residual(eta, qs, net, S_M);
    rnorm = r.lpNorm<Eigen::Infinity>();
    history.push_back(rnorm);
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best = eta;
    }
    if (!std::isfinite(rnorm)) throw EmbedError("embed: residual is not finite", best_norm, k, best);
    if (rnorm <= opts.tol) {
      rep.theta = std::move(eta);
      rep.iterations = k;
      rep.final_residual = rnorm;
      rep.converged = true;
      return rep;
    }
    if (k >= opts.stall_window &&
        rnorm > opts.stall_factor * history[static_cast<std::size_t>(k - opts.stall_window)]) {
      std::ostringstream os;
      os << "embed: simplified Newton stalled at residual " << rnorm << " after " << k
         << " iterations";
      throw EmbedError(os.str(), best_norm, k, best);
    }
  }
  std::ostringstream os;
  os << "embed: no convergence within " << opts.kmax << " iterations (residual " << best_norm
     << ")";
  throw EmbedError(os.str(), best_norm, opts.kmax, best);
}

}  // namespace ngembed
