#include "ngembed/timeint.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <ceres/ceres.h>

namespace ngembed {

Scheme scheme_from_string(const std::string& s) {
  if (s == "euler") return Scheme::Euler;
  if (s == "rk4") return Scheme::RK4;
  throw ConfigError("unknown time scheme '" + s + "' (expected euler|rk4)");
}

std::string to_string(Scheme s) { return s == Scheme::Euler ? "euler" : "rk4"; }

IntegratorConfig IntegratorConfig::for_horizon(Scheme scheme, double dt, double T) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw ConfigError("time step must be positive and T nonnegative");
  const double k = std::round(T / dt);
  if (std::abs(k * dt - T) > 1e-12 * std::max(1.0, T)) {
    std::ostringstream os;
    os << "end time " << T << " is not an integer multiple of dt = " << dt;
    throw ConfigError(os.str());
  }
  IntegratorConfig cfg;
  cfg.scheme = scheme;
  cfg.dt = dt;
  cfg.steps = static_cast<int>(k);
  return cfg;
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive and finite");
  if (steps < 0) throw ConfigError("number of steps must be nonnegative");
  if (reg < 0.0) throw ConfigError("regularization must be nonnegative");
  if (store_every < 1) throw ConfigError("store_every must be at least 1");
  if (weighted && constrain)
    throw ConfigError("weighted slopes cannot be combined with linear stage constraints");
  if (embed_options.tol <= 0.0 || embed_options.kmax < 1)
    throw ConfigError("embedding needs tol > 0 and kmax >= 1");
}

namespace {

void check_problem(const Problem& prob) {
  if (!prob.net || !prob.model) throw ConstructionError("problem needs a network and a model");
}

}  // namespace

Slope evaluate_slope(const Problem& prob, const ParamVector& theta, const IntegratorConfig& cfg) {
  check_problem(prob);
  Slope out;
  if (cfg.weighted) {
    const WeightedSystem sys = assemble_weighted(*prob.net, theta, *prob.model, prob.galerkin);
    const WeightedSlope ws = weighted_slope(sys, theta, cfg.reg);
    out.value = ws.theta_dot;
    out.residual = ws.residual;
    return out;
  }

  const SampledSystem sys = assemble_lsq(*prob.net, theta, *prob.model, prob.galerkin);
  Mat g;
  if (cfg.constrain && !prob.quantities.empty())
    g = constraint_jacobian(theta, prob.quantities, *prob.net, prob.quantity).transpose();
  LsqOptions opts;
  opts.method = cfg.lsq_method;
  opts.reg = relative_reg(sys.A, cfg.reg);
  const LsqSolution sol = solve_constrained_lsq(sys.A, sys.b, g, opts);
  out.value = sol.delta;
  out.residual = sol.residual;
  const double dn = sol.delta.norm();
  for (Eigen::Index i = 0; i < g.cols(); ++i) {
    const double denom = g.col(i).norm() * dn;
    if (denom > 0.0)
      out.constraint_violation =
          std::max(out.constraint_violation, std::abs(g.col(i).dot(sol.delta)) / denom);
  }
  return out;
}

ParamVector step(const Problem& prob, const ParamVector& theta, const IntegratorConfig& cfg,
                 StepDiagnostics* diag) {
  const double dt = cfg.dt;
  double res = 0.0, viol = 0.0;
  auto slope = [&](const ParamVector& th) {
    Slope s = evaluate_slope(prob, th, cfg);
    res = std::max(res, s.residual);
    viol = std::max(viol, s.constraint_violation);
    return std::move(s.value);
  };

  ParamVector next;
  if (cfg.scheme == Scheme::Euler) {
    next = theta + dt * slope(theta);
  } else {
    const Vec k1 = slope(theta);
    const Vec k2 = slope(theta + 0.5 * dt * k1);
    const Vec k3 = slope(theta + 0.5 * dt * k2);
    const Vec k4 = slope(theta + dt * k3);
    next = theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!next.allFinite()) throw NumericalError("non-finite parameters after the explicit update");
  if (diag) {
    diag->lsq_residual = res;
    diag->stage_constraint_violation = viol;
  }
  return next;
}

Trajectory run(Problem prob, const ParamVector& theta0, const IntegratorConfig& cfg,
               const std::function<void(const StepDiagnostics&)>& progress) {
  check_problem(prob);
  cfg.validate();
  if (theta0.size() != prob.net->num_params())
    throw ConstructionError("initial parameter vector has the wrong length");
  if (!theta0.allFinite()) throw NumericalError("initial parameters are not finite");

  if (!prob.quantities.empty()) freeze_targets(prob.quantities, *prob.net, theta0, prob.quantity);

  auto q_values = [&](const ParamVector& th) {
    if (prob.quantities.empty()) return Vec();
    return evaluate_quantities(prob.quantities, *prob.net, th, prob.quantity, false).values;
  };

  Trajectory traj;
  traj.times.push_back(cfg.t0);
  traj.steps.push_back(0);
  traj.thetas.push_back(theta0);
  traj.q_hat0 = q_values(theta0);
  traj.diagnostics.reserve(static_cast<std::size_t>(cfg.steps));

  ParamVector theta = theta0;
  for (int k = 1; k <= cfg.steps; ++k) {
    StepDiagnostics diag;
    diag.step = k;
    diag.time = cfg.t0 + k * cfg.dt;
    ParamVector tilde;
    try {
      tilde = step(prob, theta, cfg, &diag);
    } catch (const Error& e) {
      throw StepError(k, e.what());
    }

    if (cfg.embed && !prob.quantities.empty()) {
      try {
        const EmbedReport rep =
            embed(tilde, prob.quantities, *prob.net, prob.quantity, cfg.embed_options);
        theta = rep.theta;
        diag.embed_iterations = rep.iterations;
        diag.embed_residual = rep.final_residual;
      } catch (const EmbedError& e) {
        if (cfg.on_embed_failure == EmbedFailurePolicy::Abort) {
          std::ostringstream os;
          os << e.what() << " (residual " << e.residual() << " after " << e.iterations()
             << " iterations)";
          throw StepError(k, os.str());
        }
        theta = e.best();
        diag.embed_iterations = e.iterations();
        diag.embed_residual = e.residual();
        diag.embed_converged = false;
        traj.warnings.push_back("step " + std::to_string(k) + ": " + e.what());
      }
      diag.correction_norm = (theta - tilde).norm();
    } else {
      theta = std::move(tilde);
    }

    diag.q_hat = q_values(theta);
    if (k % cfg.store_every == 0 || k == cfg.steps) {
      traj.times.push_back(diag.time);
      traj.steps.push_back(k);
      traj.thetas.push_back(theta);
    }
    if (progress) progress(diag);
    traj.diagnostics.push_back(std::move(diag));
  }
  return traj;
}

namespace {

struct FitEval {
  Vec r;  // stacked u(theta, x_s) - u0(x_s)
  Mat J;  // stacked parameter gradients
};

FitEval fit_eval(const Parametrization& net, const ParamVector& theta, const Vec& target,
                 const SampleSet& S, bool with_jac) {
  const int m = net.output_dim();
  const Eigen::Index n = S.size();
  FitEval out;
  out.r.resize(n * m);
  if (with_jac) out.J.resize(n * m, net.num_params());
  const JetRequest req{0, with_jac, false};
  constexpr Eigen::Index kBlock = 32;
  const Eigen::Index nblocks = (n + kBlock - 1) / kBlock;
  detail::parallel_for(nblocks, [&](Eigen::Index blk) {
    const Eigen::Index s0 = blk * kBlock;
    const Eigen::Index cnt = std::min(kBlock, n - s0);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows;
    if (with_jac) rows.resize(cnt * m, net.num_params());
    for (Eigen::Index s = s0; s < s0 + cnt; ++s) {
      if (!with_jac) {
        out.r.segment(s * m, m) = net.value(theta, S.point(s)) - target.segment(s * m, m);
        continue;
      }
      const Jet jet = net.eval(theta, S.point(s), req);
      out.r.segment(s * m, m) = jet.u - target.segment(s * m, m);
      rows.middleRows((s - s0) * m, m) = jet.param_grad();
    }
    if (with_jac) out.J.middleRows(s0 * m, cnt * m) = rows;
  });
  return out;
}

double rmse_of(const Vec& r) { return std::sqrt(r.squaredNorm() / static_cast<double>(r.size())); }

class FitCost final : public ceres::CostFunction {
 public:
  FitCost(const Parametrization& net, const Vec& target, const SampleSet& S)
      : net_(net), target_(target), S_(S) {
    set_num_residuals(static_cast<int>(target.size()));
    mutable_parameter_block_sizes()->push_back(static_cast<int>(net.num_params()));
  }

  bool Evaluate(double const* const* parameters, double* residuals, double** jacobians) const override {
    const Eigen::Index p = net_.num_params();
    const ParamVector theta = Eigen::Map<const Vec>(parameters[0], p);
    const bool with_jac = jacobians != nullptr && jacobians[0] != nullptr;
    const FitEval ev = fit_eval(net_, theta, target_, S_, with_jac);
    if (!ev.r.allFinite()) return false;
    Eigen::Map<Vec>(residuals, ev.r.size()) = ev.r;
    if (with_jac) {
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::Map<RowMat>(jacobians[0], ev.J.rows(), p) = ev.J;
    }
    return true;
  }

 private:
  const Parametrization& net_;
  const Vec& target_;
  const SampleSet& S_;
};

class StopBelow final : public ceres::IterationCallback {
 public:
  explicit StopBelow(double cost) : cost_(cost) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& it) override {
    return it.cost <= cost_ ? ceres::SOLVER_TERMINATE_SUCCESSFULLY : ceres::SOLVER_CONTINUE;
  }

 private:
  double cost_;
};

}  // namespace

FitReport fit_from(const Parametrization& net, ParamVector theta,
                   const std::function<Vec(const Eigen::Ref<const Vec>&)>& u0,
                   const SampleSet& S_fit, const FitOptions& opts) {
  if (S_fit.size() == 0) throw Error("fit: sample set is empty");
  const int m = net.output_dim();
  Vec target(S_fit.size() * m);
  for (Eigen::Index s = 0; s < S_fit.size(); ++s) {
    const Vec v = u0(S_fit.point(s));
    if (v.size() != m) throw ConstructionError("fit: initial condition has the wrong dimension");
    target.segment(s * m, m) = v;
  }
  if (!target.allFinite()) throw NumericalError("fit: initial condition is not finite");
  if (theta.size() != net.num_params()) throw ConstructionError("fit: parameter vector has the wrong size");

  int iterations = 0;
  if (theta.size() > 0 && opts.max_iterations > 0) {
    ceres::Problem problem;
    problem.AddResidualBlock(new FitCost(net, target, S_fit), nullptr, theta.data());
    ceres::Solver::Options so;
    so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
    so.linear_solver_type = ceres::DENSE_NORMAL_CHOLESKY;
    so.max_num_iterations = opts.max_iterations;
    so.function_tolerance = 1e-14;
    so.gradient_tolerance = 0.0;
    so.parameter_tolerance = 1e-15;
    so.num_threads = 1;
    so.logging_type = ceres::SILENT;
    StopBelow stop(0.5 * static_cast<double>(target.size()) * opts.stop_rmse * opts.stop_rmse);
    if (opts.stop_rmse > 0.0) so.callbacks.push_back(&stop);
    ceres::Solver::Summary summary;
    ceres::Solve(so, &problem, &summary);
    iterations = summary.num_successful_steps + summary.num_unsuccessful_steps;
  }

  FitReport rep;
  rep.rmse = rmse_of(fit_eval(net, theta, target, S_fit, false).r);
  rep.iterations = iterations;
  rep.theta = std::move(theta);
  if (!(rep.rmse <= opts.rmse_threshold)) {
    std::ostringstream os;
    os << "initial fit reached RMSE " << rep.rmse << " after " << iterations
       << " iterations, above threshold " << opts.rmse_threshold;
    throw FitError(os.str(), rep.rmse);
  }
  return rep;
}

FitReport fit_initial(const Network& net,
                      const std::function<Vec(const Eigen::Ref<const Vec>&)>& u0,
                      const SampleSet& S_fit, std::uint64_t seed, const FitOptions& opts) {
  return fit_from(net, net.initialize(seed), u0, S_fit, opts);
}

}  // namespace ngembed
