#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonlocal/errors.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/integrator.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/model.hpp"

namespace nonlocal {

/// Parse failure carrying one "key.path: message" line per problem.
class ConfigErrors : public ConfigurationError {
 public:
  explicit ConfigErrors(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct GridSection {
  int dimension = 1;
  std::vector<Interval<double>> bounds;
  std::int64_t nodes_per_axis = 256;

  friend bool operator==(const GridSection&, const GridSection&) = default;
};

struct KernelSection {
  KernelSpec<double> spec;
  bool renormalize_rows = false;

  friend bool operator==(const KernelSection&, const KernelSection&) = default;
};

struct ModelSection {
  DecaySpec<double> decay;
  ReactionSpec<double> reaction;
  GainSpec<double> gain;
  std::vector<double> p{2.0};  // first entry is the phase-space exponent
  double delta = 1.0;
  double mu = 1.0;
  bool gradient_diagnostics = false;

  friend bool operator==(const ModelSection&, const ModelSection&) = default;
};

struct InitialCondition {
  std::string kind = "random";  // random | smooth_random | constant | sine
  double amplitude = 1.0;       // constant value, or sine amplitude
  double frequency = 1.0;       // sine: amplitude * sin(pi * frequency * coordinate_sum)
  double norm = 0.0;            // random kinds: target L^p norm; 0 means r_delta

  friend bool operator==(const InitialCondition&, const InitialCondition&) = default;
};

struct ExperimentSection {
  std::string name = "simulate";
  InitialCondition initial;
  std::int64_t trajectories = 1;
  std::int64_t ensemble_size = 8;
  std::int64_t snapshots_per_member = 4;
  double burn_in = 0.0;
  double spacing = 0.5;
  double initial_radius = 0.0;
  double norm_factor = 10.0;
  std::string perturbation = "width";  // width | mix | bump
  std::vector<double> levels;
  std::optional<KernelSpec<double>> target;  // mix
  std::vector<double> bump_center;
  double bump_width = 0.1;
  double tolerance_factor = 1e-3;
  double threshold_factor = 1e-2;
  double linearity_factor = 2.0;
  std::optional<double> gradient_tolerance;
  std::optional<double> start_time;

  friend bool operator==(const ExperimentSection&, const ExperimentSection&) = default;
};

struct RunConfig {
  GridSection grid;
  KernelSection kernel;
  ModelSection model;
  IntegratorConfig<double> integrator;
  ExperimentSection experiment;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

const std::vector<std::string>& experiment_names();

/// Parses the YAML configuration text. Unknown keys, missing required keys
/// and out-of-range values are all collected and reported together.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical YAML text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// 16 hex digits of the FNV-1a hash of the canonical text, output_dir excluded.
std::string config_hash(const RunConfig& config);

}  // namespace nonlocal
