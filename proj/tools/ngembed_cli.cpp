// Command-line front end: run | reference | check.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "ngembed/experiment.hpp"

using namespace ngembed;

namespace {

int report_error(const std::string& cmd, const std::exception& e) {
  const char* kind = "error";
  if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
  else if (dynamic_cast<const FitError*>(&e)) kind = "fit";
  else if (dynamic_cast<const StepError*>(&e)) kind = "integration";
  else if (dynamic_cast<const NumericalError*>(&e)) kind = "numerical";
  else if (dynamic_cast<const ConstructionError*>(&e)) kind = "construction";
  std::cerr << "{\"command\": \"" << cmd << "\", \"kind\": \"" << kind << "\", \"message\": \"";
  for (const char* c = e.what(); *c; ++c) {
    if (*c == '"' || *c == '\\') std::cerr << '\\';
    std::cerr << *c;
  }
  std::cerr << "\"}\n";
  return 2;
}

void log_line(const std::string& s) { std::cerr << "[ngembed] " << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural Galerkin solver with conservation by embedding"};
  app.require_subcommand(1);

  std::string config;
  std::string variant;
  auto* run = app.add_subcommand("run", "integrate an experiment and write trajectory, metrics and manifest");
  run->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--variant", variant, "override solver.variant (plain|constrained|embedded|weighted)");

  auto* ref = app.add_subcommand("reference", "compute the spectral reference and write it as a trajectory file");
  ref->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* chk = app.add_subcommand("check", "parse and validate a config");
  chk->add_option("config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    ExperimentConfig cfg = load_config(config);
    if (!variant.empty()) {
      cfg.variant = variant_from_string(variant);
      cfg.validate();
    }

    if (cmd == "check") {
      const ExperimentSetup setup = make_setup(cfg);
      std::cout << "ok: " << cfg.name << " (" << cfg.model << ", " << to_string(cfg.variant)
                << ", p = " << setup.net->num_params() << ", steps = " << make_integrator_config(cfg).steps
                << ")\n";
      return 0;
    }

    if (cmd == "reference") {
      const auto model = make_model(cfg);
      const IntegratorConfig ic = make_integrator_config(cfg);
      std::vector<double> times;
      for (int k = 0; k <= ic.steps; ++k)
        if (k % ic.store_every == 0 || k == ic.steps) times.push_back(k * ic.dt);
      log_line("computing spectral reference");
      const ReferenceSolution sol = compute_reference(cfg, *model, times);
      const std::filesystem::path dir(resolve_output_dir(cfg));
      const std::string path =
          (dir / (cfg.trajectory_format == TrajectoryFormat::Csv ? "reference.csv" : "reference.bin")).string();
      write_reference(cfg, sol, path);
      std::cout << path << '\n';
      return 0;
    }

    const ExperimentSetup setup = make_setup(cfg);
    log_line(cfg.name + ": " + cfg.model + ", variant " + to_string(cfg.variant) + ", p = " +
             std::to_string(setup.net->num_params()));
    const ExperimentResult res = run_pipeline(cfg, setup, std::nullopt, log_line);
    write_outputs(cfg, setup, res);
    const auto& m = res.metrics;
    std::cout << "output: " << resolve_output_dir(cfg) << '\n';
    std::printf("final E_r = %.3e\n", m.E_r.back());
    for (std::size_t i = 0; i < m.quantity_names.size(); ++i)
      std::printf("max E_C[%s] = %.3e\n", m.quantity_names[i].c_str(), m.max_conservation_error(i));
    std::printf("embed iterations: median %.1f, max %d\n", res.embed.median, res.embed.max);
    for (const auto& w : res.trajectory.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
  } catch (const std::exception& e) {
    return report_error(cmd, e);
  }
}
