#include "ngembed/experiment.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <ceres/version.h>
#include <fftw3.h>

#include "json.hpp"

namespace ngembed {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::Plain;
  if (s == "constrained") return Variant::Constrained;
  if (s == "embedded") return Variant::Embedded;
  if (s == "weighted") return Variant::Weighted;
  throw ConfigError("unknown variant '" + s + "' (expected plain|constrained|embedded|weighted)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Plain: return "plain";
    case Variant::Constrained: return "constrained";
    case Variant::Embedded: return "embedded";
    case Variant::Weighted: return "weighted";
  }
  return "?";
}

namespace {

Box model_box(const std::string& model) {
  if (model == "burgers" || model == "wave") return {Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)};
  if (model == "swe") return {Vec::Constant(2, -4.0), Vec::Constant(2, 4.0)};
  throw ConfigError("unknown model '" + model + "' (expected burgers|wave|swe)");
}

Vec axis_coords(const Box& box, int axis, int n, double offset) {
  Vec x(n);
  const double h = (box.hi[axis] - box.lo[axis]) / n;
  for (int i = 0; i < n; ++i) x[i] = box.lo[axis] + (i + offset) * h;
  return x;
}

bool shares_coordinate(const Vec& a, const Vec& b, double tol) {
  for (double x : a)
    for (double y : b)
      if (std::abs(x - y) <= tol) return true;
  return false;
}

// Two tensor grids are disjoint when some axis has no common coordinate.
bool tensor_grids_disjoint(const Box& box, int n1, double off1, int n2, double off2) {
  for (int a = 0; a < box.dim(); ++a) {
    const double tol = 1e-12 * (box.hi[a] - box.lo[a]);
    if (!shares_coordinate(axis_coords(box, a, n1, off1), axis_coords(box, a, n2, off2), tol))
      return true;
  }
  return false;
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  const Box box = model_box(model);
  if (periodic_width < 1) throw ConfigError("network.periodic_width must be positive");
  for (int w : hidden)
    if (w < 1) throw ConfigError("network.hidden widths must be positive");
  if (n_galerkin < 1 || n_quantity < 1 || n_test < 1 || n_fit < 1)
    throw ConfigError("sample counts must be positive");
  if (!(test_offset > 0.0 && test_offset < 1.0)) throw ConfigError("samples.test_offset must lie in (0, 1)");
  (void)IntegratorConfig::for_horizon(scheme, dt, T);
  if (store_every < 1) throw ConfigError("time.store_every must be at least 1");
  if (reg < 0.0) throw ConfigError("solver.reg must be nonnegative");
  if (embed.tol <= 0.0 || embed.kmax < 1) throw ConfigError("embed.tol must be positive and embed.kmax >= 1");
  if (variant == Variant::Weighted && model == "swe")
    throw ConfigError("the weighted variant needs a factorizable Hamiltonian; swe has none");
  if (model == "burgers" && burgers_initial != "cosine" && burgers_initial != "gaussian")
    throw ConfigError("model.initial must be cosine|gaussian");
  if (model == "wave" && (!(wave_c > 0.0) || !(wave_rho_bar > 0.0)))
    throw ConfigError("wave speed and reference density must be positive");
  if (reference && (reference_modes < 4 || reference_modes % 2))
    throw ConfigError("reference.modes must be even and at least 4");
  if (reference && !(reference_dt > 0.0)) throw ConfigError("reference.dt must be positive");
  if (!tensor_grids_disjoint(box, n_test, test_offset, n_galerkin, 0.0))
    throw ConfigError("test points coincide with Galerkin sample points; change samples.test_offset");
  if (!tensor_grids_disjoint(box, n_test, test_offset, n_quantity, 0.0))
    throw ConfigError("test points coincide with quantity sample points; change samples.test_offset");
  if (output.empty()) throw ConfigError("output directory must be set");
}

double ExperimentConfig::reference_step() const {
  const double n = std::ceil(dt / reference_dt * (1.0 - 1e-12));
  return dt / std::max(1.0, n);
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["model"] = {{"name", model}};
  if (model == "burgers") j["model"]["initial"] = burgers_initial;
  if (model == "wave") {
    j["model"]["c"] = wave_c;
    j["model"]["rho_bar"] = wave_rho_bar;
  }
  j["network"] = {{"periodic_width", periodic_width},
                  {"hidden", hidden},
                  {"activation", ngembed::to_string(activation)}};
  j["samples"] = {{"galerkin", n_galerkin},
                  {"quantity", n_quantity},
                  {"test", n_test},
                  {"fit", n_fit},
                  {"test_offset", test_offset}};
  j["time"] = {{"scheme", ngembed::to_string(scheme)}, {"dt", dt}, {"T", T}, {"store_every", store_every}};
  j["solver"] = {{"variant", ngembed::to_string(variant)}, {"reg", reg}, {"lsq", ngembed::to_string(lsq)}};
  j["embed"] = {{"tol", embed.tol},
                {"kmax", embed.kmax},
                {"on_failure", on_embed_failure == EmbedFailurePolicy::Abort ? "abort" : "warn"}};
  j["fit"] = {{"max_iterations", fit.max_iterations},
              {"rmse_threshold", fit.rmse_threshold},
              {"stop_rmse", fit.stop_rmse}};
  j["reference"] = {{"enabled", reference}, {"modes", reference_modes}, {"dt", reference_dt}};
  j["seed"] = seed;
  j["output"] = output;
  j["trajectory_format"] = trajectory_format == TrajectoryFormat::Csv ? "csv" : "binary";
  return j.dump(2);
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "config",
                 {"name", "model", "network", "samples", "time", "solver", "embed", "fit", "reference",
                  "seed", "output", "trajectory_format"});
  ExperimentConfig c;
  read(root, "name", c.name);
  read(root, "seed", c.seed);
  read(root, "output", c.output);
  if (root.contains("trajectory_format")) {
    std::string f;
    read(root, "trajectory_format", f);
    c.trajectory_format = trajectory_format_from_string(f);
  }

  const json& m = section(root, "model");
  reject_unknown(m, "model", {"name", "c", "rho_bar", "initial"});
  read(m, "name", c.model);
  read(m, "initial", c.burgers_initial);
  read(m, "c", c.wave_c);
  read(m, "rho_bar", c.wave_rho_bar);
  // Sensible per-model defaults before the remaining sections override them.
  if (c.model == "wave" || c.model == "swe") c.hidden = {10, 10, 20};

  const json& n = section(root, "network");
  reject_unknown(n, "network", {"periodic_width", "hidden", "activation"});
  read(n, "periodic_width", c.periodic_width);
  read(n, "hidden", c.hidden);
  if (n.contains("activation")) {
    std::string a;
    read(n, "activation", a);
    c.activation = activation_from_string(a);
  }

  const json& s = section(root, "samples");
  reject_unknown(s, "samples", {"galerkin", "quantity", "test", "fit", "test_offset"});
  read(s, "galerkin", c.n_galerkin);
  c.n_quantity = c.n_galerkin;
  read(s, "quantity", c.n_quantity);
  read(s, "test", c.n_test);
  read(s, "fit", c.n_fit);
  read(s, "test_offset", c.test_offset);

  const json& t = section(root, "time");
  reject_unknown(t, "time", {"scheme", "dt", "T", "store_every"});
  if (t.contains("scheme")) {
    std::string sc;
    read(t, "scheme", sc);
    c.scheme = scheme_from_string(sc);
  }
  read(t, "dt", c.dt);
  read(t, "T", c.T);
  read(t, "store_every", c.store_every);

  const json& sv = section(root, "solver");
  reject_unknown(sv, "solver", {"variant", "reg", "lsq"});
  if (sv.contains("variant")) {
    std::string v;
    read(sv, "variant", v);
    c.variant = variant_from_string(v);
  }
  read(sv, "reg", c.reg);
  if (sv.contains("lsq")) {
    std::string l;
    read(sv, "lsq", l);
    c.lsq = lsq_method_from_string(l);
  }

  const json& e = section(root, "embed");
  reject_unknown(e, "embed", {"tol", "kmax", "on_failure"});
  read(e, "tol", c.embed.tol);
  read(e, "kmax", c.embed.kmax);
  if (e.contains("on_failure")) {
    std::string p;
    read(e, "on_failure", p);
    if (p == "abort") c.on_embed_failure = EmbedFailurePolicy::Abort;
    else if (p == "warn") c.on_embed_failure = EmbedFailurePolicy::Warn;
    else throw ConfigError("embed.on_failure must be abort|warn");
  }

  const json& f = section(root, "fit");
  reject_unknown(f, "fit", {"max_iterations", "rmse_threshold", "stop_rmse"});
  read(f, "max_iterations", c.fit.max_iterations);
  read(f, "rmse_threshold", c.fit.rmse_threshold);
  read(f, "stop_rmse", c.fit.stop_rmse);

  const json& r = section(root, "reference");
  reject_unknown(r, "reference", {"enabled", "modes", "dt"});
  read(r, "enabled", c.reference);
  read(r, "modes", c.reference_modes);
  read(r, "dt", c.reference_dt);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path out(cfg.output);
  if (out.is_relative()) {
    if (const char* root = std::getenv("NGEMBED_OUTPUT_ROOT"); root && *root)
      out = std::filesystem::path(root) / out;
  }
  return out.string();
}

std::unique_ptr<PdeModel> make_model(const ExperimentConfig& cfg) {
  if (cfg.model == "burgers")
    return std::make_unique<BurgersModel>(cfg.burgers_initial == "gaussian" ? &BurgersModel::gaussian_initial
                                                                            : &BurgersModel::default_initial);
  if (cfg.model == "wave") return std::make_unique<WaveModel>(cfg.wave_c, cfg.wave_rho_bar);
  if (cfg.model == "swe") return std::make_unique<ShallowWaterModel>();
  throw ConfigError("unknown model '" + cfg.model + "'");
}

Architecture make_architecture(const ExperimentConfig& cfg, const PdeModel& model) {
  Architecture a;
  a.input_dim = model.spatial_dim();
  a.output_dim = model.output_dim();
  const Vec L = model.domain().periods();
  a.periodic = PeriodicLayerSpec{std::vector<double>(L.data(), L.data() + L.size()), cfg.periodic_width};
  a.hidden = cfg.hidden;
  a.activation = cfg.activation;
  a.output_bias = false;
  return a;
}

IntegratorConfig make_integrator_config(const ExperimentConfig& cfg) {
  IntegratorConfig ic = IntegratorConfig::for_horizon(cfg.scheme, cfg.dt, cfg.T);
  ic.constrain = cfg.variant == Variant::Constrained || cfg.variant == Variant::Embedded;
  ic.embed = cfg.variant == Variant::Embedded;
  ic.weighted = cfg.variant == Variant::Weighted;
  ic.reg = cfg.reg;
  ic.lsq_method = cfg.lsq;
  ic.embed_options = cfg.embed;
  ic.on_embed_failure = cfg.on_embed_failure;
  ic.store_every = cfg.store_every;
  return ic;
}

ExperimentSetup make_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup s;
  s.model = make_model(cfg);
  s.net = std::make_unique<Network>(make_architecture(cfg, *s.model));
  const Box box = s.model->domain();
  s.galerkin = equidistant_grid(box, cfg.n_galerkin, 0.0, SampleRole::Galerkin);
  s.quantity = equidistant_grid(box, cfg.n_quantity, 0.0, SampleRole::Quantity);
  s.test = equidistant_grid(box, cfg.n_test, cfg.test_offset, SampleRole::Test);
  s.fit = equidistant_grid(box, cfg.n_fit, 0.5, SampleRole::Fit);
  for (int a = 0; a < box.dim(); ++a) s.test_axes.push_back(axis_coords(box, a, cfg.n_test, cfg.test_offset));
  s.quantities = s.model->quantities();
  return s;
}

FitReport fit_initial_condition(const ExperimentConfig& cfg, const ExperimentSetup& setup) {
  const PdeModel& model = *setup.model;
  auto u0 = [&model](const Eigen::Ref<const Vec>& x) { return model.initial_condition(x); };
  return fit_initial(*setup.net, u0, setup.fit, cfg.seed, cfg.fit);
}

ReferenceSolution compute_reference(const ExperimentConfig& cfg, const PdeModel& model,
                                    const std::vector<double>& times) {
  SpectralOptions o;
  o.dt = cfg.reference_step();
  o.T = cfg.T;
  o.output_times = times;
  const SpectralField u0 = grid_initial_condition(model, cfg.reference_modes);
  return ReferenceSolution(spectral_solve(model, u0, o), o.dt);
}

double relative_error(const Mat& approx, const Mat& ref) {
  if (approx.rows() != ref.rows() || approx.cols() != ref.cols())
    throw ConstructionError("relative error: shape mismatch");
  const double den = ref.rowwise().norm().sum();
  if (!(den > 0.0)) throw NumericalError("relative error: reference norm is zero");
  return (approx - ref).rowwise().norm().sum() / den;
}

Mat evaluate_on(const Parametrization& net, const ParamVector& theta, const SampleSet& S) {
  Mat out(S.size(), net.output_dim());
  detail::parallel_for(S.size(), [&](Eigen::Index s) { out.row(s) = net.value(theta, S.point(s)).transpose(); });
  return out;
}

std::vector<double> relative_error_series(const Parametrization& net, const Trajectory& traj,
                                          const ReferenceSolution& ref, const SampleSet& test,
                                          const std::vector<Vec>& test_axes) {
  std::vector<double> out;
  out.reserve(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const Mat approx = evaluate_on(net, traj.thetas[k], test);
    const Mat r = test_axes.empty() ? ref.sample(traj.times[k], test.points)
                                    : ref.sample_grid(traj.times[k], test_axes);
    out.push_back(relative_error(approx, r));
  }
  return out;
}

std::vector<double> conservation_error(const std::vector<double>& q) {
  std::vector<double> out;
  out.reserve(q.size());
  for (double v : q) out.push_back(std::abs(v - q.front()));
  return out;
}

std::string MetricSeries::to_csv() const {
  std::ostringstream os;
  os << "time,E_r";
  for (const auto& n : quantity_names) os << ",E_C_" << n;
  for (const auto& n : quantity_names) os << ",q_hat_" << n;
  os << ",embed_iters,lsq_residual\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << fmt(times[k]) << ',' << fmt(E_r[k]);
    for (const auto& e : E_C) os << ',' << fmt(e[k]);
    for (const auto& q : q_hat) os << ',' << fmt(q[k]);
    os << ',' << embed_iters[k] << ',' << fmt(lsq_residual[k]) << '\n';
  }
  return os.str();
}

double MetricSeries::max_conservation_error(std::size_t q) const {
  return *std::max_element(E_C.at(q).begin(), E_C.at(q).end());
}

MetricSeries compute_metrics(const ExperimentSetup& setup, const Trajectory& traj,
                             const ReferenceSolution* ref) {
  MetricSeries ms;
  ms.times = traj.times;
  const std::size_t K = traj.times.size();
  if (ref) {
    ms.E_r = relative_error_series(*setup.net, traj, *ref, setup.test, setup.test_axes);
  } else {
    ms.E_r.assign(K, std::numeric_limits<double>::quiet_NaN());
  }
  for (const auto& q : setup.quantities) ms.quantity_names.push_back(q.name);
  ms.q_hat.assign(setup.quantities.size(), std::vector<double>(K));
  for (std::size_t k = 0; k < K; ++k) {
    const Vec v = evaluate_quantities(setup.quantities, *setup.net, traj.thetas[k], setup.test, false).values;
    for (std::size_t i = 0; i < setup.quantities.size(); ++i) ms.q_hat[i][k] = v[static_cast<Eigen::Index>(i)];
  }
  for (const auto& q : ms.q_hat) ms.E_C.push_back(conservation_error(q));
  ms.embed_iters.assign(K, 0);
  ms.lsq_residual.assign(K, 0.0);
  for (std::size_t k = 1; k < K; ++k) {
    const StepDiagnostics& d = traj.diagnostics.at(static_cast<std::size_t>(traj.steps[k] - 1));
    ms.embed_iters[k] = d.embed_iterations;
    ms.lsq_residual[k] = d.lsq_residual;
  }
  return ms;
}

EmbedStats embed_stats(const Trajectory& traj) {
  EmbedStats st;
  std::vector<int> its;
  for (const auto& d : traj.diagnostics) its.push_back(d.embed_iterations);
  st.steps = static_cast<int>(its.size());
  if (its.empty()) return st;
  for (int i : its) ++st.histogram[i];
  std::sort(its.begin(), its.end());
  const std::size_t n = its.size();
  st.median = n % 2 ? its[n / 2] : 0.5 * (its[n / 2 - 1] + its[n / 2]);
  st.min = its.front();
  st.max = its.back();
  double sum = 0.0;
  for (int i : its) sum += i;
  st.mean = sum / static_cast<double>(n);
  return st;
}

ExperimentResult run_pipeline(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                              const std::optional<FitReport>& fit, const Logger& log) {
  using clock = std::chrono::steady_clock;
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  ExperimentResult res;
  if (fit) {
    res.fit = *fit;
  } else {
    say("fitting initial condition");
    res.fit = fit_initial_condition(cfg, setup);
  }
  {
    std::ostringstream os;
    os << "initial fit rmse " << res.fit.rmse << " (" << res.fit.iterations << " iterations)";
    say(os.str());
  }

  Problem prob;
  prob.net = setup.net.get();
  prob.model = setup.model.get();
  prob.galerkin = setup.galerkin;
  prob.quantity = setup.quantity;
  prob.quantities = setup.quantities;
  const IntegratorConfig ic = make_integrator_config(cfg);
  const int report_every = std::max(1, ic.steps / 10);
  const auto t0 = clock::now();
  res.trajectory = run(prob, res.fit.theta, ic, [&](const StepDiagnostics& d) {
    if (d.step % report_every == 0 || d.step == ic.steps) {
      std::ostringstream os;
      os << "step " << d.step << "/" << ic.steps << " t=" << d.time << " lsq_res=" << d.lsq_residual
         << " embed_iters=" << d.embed_iterations;
      say(os.str());
    }
  });
  res.seconds_integrate = std::chrono::duration<double>(clock::now() - t0).count();

  std::optional<ReferenceSolution> ref;
  if (cfg.reference) {
    say("computing spectral reference");
    const auto t1 = clock::now();
    ref = compute_reference(cfg, *setup.model, res.trajectory.times);
    res.seconds_reference = std::chrono::duration<double>(clock::now() - t1).count();
  }
  res.metrics = compute_metrics(setup, res.trajectory, ref ? &*ref : nullptr);
  res.embed = embed_stats(res.trajectory);
  return res;
}

std::map<std::string, std::string> library_versions() {
  std::map<std::string, std::string> v;
  v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  v["fftw"] = fftw_version;
  v["ceres"] = CERES_VERSION_STRING;
  v["compiler"] = __VERSION__;
  return v;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentSetup& setup,
                   const ExperimentResult& res) {
  const std::filesystem::path dir(resolve_output_dir(cfg));
  std::filesystem::create_directories(dir);

  TrajectoryFile tf;
  tf.p = setup.net->num_params();
  tf.m = setup.model->output_dim();
  tf.d = setup.model->spatial_dim();
  tf.times = res.trajectory.times;
  tf.records = res.trajectory.thetas;
  const bool csv = cfg.trajectory_format == TrajectoryFormat::Csv;
  write_trajectory((dir / (csv ? "trajectory.csv" : "trajectory.bin")).string(), tf, cfg.trajectory_format);
  write_file_atomic((dir / "metrics.csv").string(), res.metrics.to_csv());

  json man;
  man["config"] = json::parse(cfg.to_json());
  man["seed"] = cfg.seed;
  man["versions"] = library_versions();
  man["num_params"] = setup.net->num_params();
  man["initial_fit"] = {{"rmse", res.fit.rmse}, {"iterations", res.fit.iterations}};
  json hist = json::object();
  for (const auto& [k, c] : res.embed.histogram) hist[std::to_string(k)] = c;
  man["embed_iterations"] = {{"steps", res.embed.steps}, {"median", res.embed.median},
                             {"min", res.embed.min},     {"max", res.embed.max},
                             {"mean", res.embed.mean},   {"histogram", hist}};
  json fin = json::object();
  if (!res.metrics.times.empty()) {
    fin["time"] = res.metrics.times.back();
    fin["E_r"] = res.metrics.E_r.back();
    for (std::size_t i = 0; i < res.metrics.quantity_names.size(); ++i)
      fin["max_E_C_" + res.metrics.quantity_names[i]] = res.metrics.max_conservation_error(i);
  }
  man["final"] = fin;
  man["warnings"] = res.trajectory.warnings;
  man["seconds"] = {{"integrate", res.seconds_integrate}, {"reference", res.seconds_reference}};
  write_file_atomic((dir / "manifest.json").string(), man.dump(2) + "\n");
}

void write_reference(const ExperimentConfig& cfg, const ReferenceSolution& ref, const std::string& path) {
  TrajectoryFile tf;
  const auto& frames = ref.frames();
  tf.m = static_cast<int>(frames.front().values.cols());
  tf.d = static_cast<int>(frames.front().n.size());
  tf.p = frames.front().values.size();
  for (const auto& f : frames) {
    tf.times.push_back(f.t);
    tf.records.push_back(Eigen::Map<const Vec>(f.values.data(), f.values.size()));
  }
  write_trajectory(path, tf, cfg.trajectory_format);
}

}  // namespace ngembed
