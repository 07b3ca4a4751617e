#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nonlocal/config.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/model.hpp"

namespace nonlocal {

struct RunOptions {
  std::optional<std::string> experiment;  // overrides experiment.name
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

struct RunResult {
  int exit_code = 0;
  std::string status;   // "ok" or the failure class
  std::string message;
  std::string output_dir;
  std::vector<std::string> files;  // relative to output_dir, manifest.json last
  std::string summary;
};

GridPtr<double> make_grid(const RunConfig& config);
KernelMatrixPtr<double> make_kernel(const RunConfig& config, const GridPtr<double>& grid);
ModelSpec<double> make_model(const RunConfig& config, const KernelMatrixPtr<double>& kernel);

/// Runs the configured experiment and writes manifest.json, results.json,
/// summary.txt, config.yaml and the experiment's CSV files. Never throws;
/// failures are reported through exit_code and the written results.
RunResult run(RunConfig config, const RunOptions& options = {});

}  // namespace nonlocal
