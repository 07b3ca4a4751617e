#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "nonlocal/config.hpp"
#include "nonlocal/errors.hpp"
#include "nonlocal/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nonlocal evolution equations: simulation and attractor diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;

  const std::pair<const char*, const char*> commands[] = {
      {"validate", "Check the model hypotheses and report derived constants"},
      {"simulate", "Integrate trajectories and write norm time series"},
      {"absorb", "Measure absorbing-ball entry times against the analytic bound"},
      {"attractor", "Sample the global attractor by long-time ensemble evolution"},
      {"continuity", "Semidistances between attractors under shrinking kernel perturbations"},
      {"deviation", "Trajectory deviation under kernel perturbation against the exponential envelope"},
      {"gradient", "Gradient-norm contraction above the predicted threshold"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "YAML configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Seed (overrides the config)");
    sub->add_option("--threads,-j", threads, "Worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : nonlocal::exit_code(nonlocal::FailureClass::usage);
  }

  nonlocal::RunOptions options;
  options.experiment = app.get_subcommands().front()->get_name();
  if (!out_dir.empty()) options.output_dir = out_dir;
  options.seed = seed;
  options.threads = threads;

  nonlocal::RunConfig config;
  try {
    config = nonlocal::load_config(config_path);
  } catch (const nonlocal::Error& e) {
    std::cerr << e.what() << "\n";
    return nonlocal::exit_code(e.kind());
  }

  const auto result = nonlocal::run(config, options);
  std::cout << result.summary;
  if (result.exit_code != 0) std::cerr << "error (" << result.status << "): " << result.message << "\n";
  std::cout << "outputs in " << result.output_dir << "\n";
  return result.exit_code;
}
