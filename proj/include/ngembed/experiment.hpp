#pragma once
// Benchmark pipelines: configuration, initial fit, integration, reference
// solution, error metrics and output files.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ngembed/reference.hpp"
#include "ngembed/timeint.hpp"
#include "ngembed/trajectory_io.hpp"

namespace ngembed {

enum class Variant { Plain, Constrained, Embedded, Weighted };
Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ExperimentConfig {
  std::string name = "experiment";
  std::string model = "burgers";  // burgers | wave | swe
  std::string burgers_initial = "cosine";  // cosine | gaussian
  double wave_c = 1.0;
  double wave_rho_bar = 1.0;

  int periodic_width = 10;
  std::vector<int> hidden = {10, 10, 10};
  Activation activation = Activation::Sine;

  // Equidistant points per axis.
  int n_galerkin = 200;
  int n_quantity = 200;
  int n_test = 400;
  int n_fit = 800;
  double test_offset = 1.0 / 3.0;  // in cells of the test grid

  Scheme scheme = Scheme::RK4;
  double dt = 5e-3;
  double T = 0.4;
  int store_every = 1;

  Variant variant = Variant::Embedded;
  double reg = 1e-8;
  LsqMethod lsq = LsqMethod::QR;
  EmbedOptions embed;
  EmbedFailurePolicy on_embed_failure = EmbedFailurePolicy::Abort;

  FitOptions fit;
  std::uint64_t seed = 1;

  bool reference = true;
  int reference_modes = 200;
  double reference_dt = 1e-3;  // upper bound; see reference_step()

  std::string output = "out/experiment";
  TrajectoryFormat trajectory_format = TrajectoryFormat::Csv;

  /// Throws ConfigError on any inconsistency, including overlapping test
  /// and training points.
  void validate() const;
  /// Largest step <= reference_dt that divides the output interval.
  double reference_step() const;
  std::string to_json() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Output directory with NGEMBED_OUTPUT_ROOT applied to relative paths.
std::string resolve_output_dir(const ExperimentConfig& cfg);

std::unique_ptr<PdeModel> make_model(const ExperimentConfig& cfg);
Architecture make_architecture(const ExperimentConfig& cfg, const PdeModel& model);
IntegratorConfig make_integrator_config(const ExperimentConfig& cfg);

struct ExperimentSetup {
  std::unique_ptr<PdeModel> model;
  std::unique_ptr<Network> net;
  SampleSet galerkin, quantity, test, fit;
  std::vector<Vec> test_axes;  // per-axis coordinates of the test grid
  std::vector<Quantity> quantities;
};

ExperimentSetup make_setup(const ExperimentConfig& cfg);

/// Damped Gauss-Newton fit of the initial condition (seeded).
FitReport fit_initial_condition(const ExperimentConfig& cfg, const ExperimentSetup& setup);

/// Spectral reference with frames at the given times.
ReferenceSolution compute_reference(const ExperimentConfig& cfg, const PdeModel& model,
                                    const std::vector<double>& times);

/// sum_i ||approx_i - ref_i|| / sum_i ||ref_i|| over rows; throws on a zero denominator.
double relative_error(const Mat& approx, const Mat& ref);

/// Network values at the test grid, n x m.
Mat evaluate_on(const Parametrization& net, const ParamVector& theta, const SampleSet& S);

/// E_r(t_k) for every stored time.
std::vector<double> relative_error_series(const Parametrization& net, const Trajectory& traj,
                                          const ReferenceSolution& ref, const SampleSet& test,
                                          const std::vector<Vec>& test_axes);

/// |q(t_k) - q(t_0)| for a series of estimator values.
std::vector<double> conservation_error(const std::vector<double>& q_values);

struct MetricSeries {
  std::vector<double> times;
  std::vector<double> E_r;  // NaN when no reference was computed
  std::vector<std::string> quantity_names;
  std::vector<std::vector<double>> E_C;    // per quantity, per stored time
  std::vector<std::vector<double>> q_hat;  // test-point estimates, per quantity
  std::vector<int> embed_iters;
  std::vector<double> lsq_residual;

  std::string to_csv() const;
  double max_conservation_error(std::size_t q) const;
};

MetricSeries compute_metrics(const ExperimentSetup& setup, const Trajectory& traj,
                             const ReferenceSolution* ref);

struct EmbedStats {
  int steps = 0;
  double median = 0.0;
  int min = 0;
  int max = 0;
  double mean = 0.0;
  std::map<int, int> histogram;
};
EmbedStats embed_stats(const Trajectory& traj);

struct ExperimentResult {
  FitReport fit;
  Trajectory trajectory;
  MetricSeries metrics;
  EmbedStats embed;
  double seconds_integrate = 0.0;
  double seconds_reference = 0.0;
};

using Logger = std::function<void(const std::string&)>;

/// Full pipeline without file output. A precomputed initial fit may be passed
/// to share it across variants.
ExperimentResult run_pipeline(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                              const std::optional<FitReport>& fit = std::nullopt,
                              const Logger& log = {});

/// Writes trajectory, metrics.csv and manifest.json into the output directory.
void write_outputs(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                   const ExperimentResult& res);

/// Reference frames at every stored time written in the trajectory format.
void write_reference(const ExperimentConfig& cfg, const ReferenceSolution& ref,
                     const std::string& path);

/// Version strings of the numerical libraries in use.
std::map<std::string, std::string> library_versions();

}  // namespace ngembed
