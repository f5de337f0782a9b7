#pragma once
// Explicit time integration of the (constrained / weighted) sampled Neural
// Galerkin system, optional per-step embedding, and initial-condition fitting.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ngembed/embed.hpp"
#include "ngembed/galerkin.hpp"
#include "ngembed/weighted.hpp"

namespace ngembed {

enum class Scheme { Euler, RK4 };
Scheme scheme_from_string(const std::string& s);
std::string to_string(Scheme s);

enum class EmbedFailurePolicy { Abort, Warn };

struct IntegratorConfig {
  Scheme scheme = Scheme::RK4;
  double dt = 1e-3;
  int steps = 0;
  double t0 = 0.0;
  bool constrain = false;  // add g^T delta = 0 to every stage solve
  bool embed = false;      // project onto the sampled constrained manifold after each step
  bool weighted = false;   // slopes from M_Q theta_dot = J_Q D theta instead of least squares
  double reg = 1e-8;       // Tikhonov weight relative to mean diag(A^T A) (or of M_Q)
  LsqMethod lsq_method = LsqMethod::QR;
  EmbedOptions embed_options;
  EmbedFailurePolicy on_embed_failure = EmbedFailurePolicy::Abort;
  int store_every = 1;  // keep theta every this many steps (first and last always kept)

  /// dt and steps from an end time; throws if T is not a multiple of dt.
  static IntegratorConfig for_horizon(Scheme scheme, double dt, double T);
  void validate() const;
};

/// Everything the driver needs besides the parameters.
struct Problem {
  const Parametrization* net = nullptr;
  const PdeModel* model = nullptr;
  SampleSet galerkin;
  SampleSet quantity;
  std::vector<Quantity> quantities;
};

struct StepDiagnostics {
  int step = 0;  // index of the completed step (1..K)
  double time = 0.0;
  double lsq_residual = 0.0;          // max over stages
  double stage_constraint_violation = 0.0;  // max |g^T s| / (||g|| ||s||) over stages
  int embed_iterations = 0;
  double embed_residual = 0.0;
  bool embed_converged = true;
  double correction_norm = 0.0;  // ||theta - theta_tilde||
  Vec q_hat;                     // sampled quantities on the quantity set after the step
};

struct Trajectory {
  std::vector<double> times;        // stored times, strictly increasing
  std::vector<int> steps;           // step index of each stored time
  std::vector<ParamVector> thetas;  // stored parameters
  std::vector<StepDiagnostics> diagnostics;  // every step
  Vec q_hat0;                        // sampled quantities at t0
  std::vector<std::string> warnings;
};

class StepError : public Error {
 public:
  StepError(int step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

struct Slope {
  Vec value;
  double residual = 0.0;
  double constraint_violation = 0.0;
};

/// Time derivative of theta at one stage.
Slope evaluate_slope(const Problem& prob, const ParamVector& theta, const IntegratorConfig& cfg);

/// One explicit step without embedding. Returns theta_tilde_{k+1}.
ParamVector step(const Problem& prob, const ParamVector& theta, const IntegratorConfig& cfg,
                 StepDiagnostics* diag = nullptr);

/// Freezes quantity targets at theta0, then per step assembles, solves,
/// advances and optionally embeds.
Trajectory run(Problem prob, const ParamVector& theta0, const IntegratorConfig& cfg,
               const std::function<void(const StepDiagnostics&)>& progress = {});

struct FitOptions {
  int max_iterations = 500;
  double rmse_threshold = 1e-5;
  double stop_rmse = 0.0;  // stop early once below; 0 iterates to stagnation
};

struct FitReport {
  ParamVector theta;
  double rmse = 0.0;
  int iterations = 0;
};

/// Levenberg-Marquardt fit of u(theta, .) to u0 on S_fit, starting from the
/// seeded initialization. Throws FitError if the RMSE stays above threshold.
FitReport fit_initial(const Network& net,
                      const std::function<Vec(const Eigen::Ref<const Vec>&)>& u0,
                      const SampleSet& S_fit, std::uint64_t seed, const FitOptions& opts = {});

/// Same, starting from a given parameter vector.
FitReport fit_from(const Parametrization& net, ParamVector theta,
                   const std::function<Vec(const Eigen::Ref<const Vec>&)>& u0,
                   const SampleSet& S_fit, const FitOptions& opts = {});

}  // namespace ngembed
