#include "nonlocal/run.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nonlocal/attractor.hpp"
#include "nonlocal/integrator.hpp"
#include "nonlocal/random.hpp"

#ifndef NONLOCAL_VERSION
#define NONLOCAL_VERSION "0.0.0"
#endif

namespace nonlocal {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Outputs {
  json results = json::object();
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::string> summary;

  void line(const std::string& s) { summary.push_back(s); }
};

struct Context {
  RunConfig config;
  std::string hash;
  int threads = 1;
  GridPtr<double> grid;
  KernelMatrixPtr<double> kernel;
  std::optional<ModelSpec<double>> spec;

  std::string tag() const { return hash.substr(0, 8); }
  const ModelSpec<double>& model() const { return *spec; }
};

std::string num(double v) { return format_number(v); }

json constants_json(const DerivedConstants<double>& c) {
  json j = {{"r_delta", c.r_delta}, {"epsilon", c.epsilon}, {"norm_decay_rate", c.norm_decay_rate}};
  if (c.gradient) {
    j["gradient"] = {{"epsilon", c.gradient->epsilon},
                     {"bound_M", c.gradient->bound_M},
                     {"threshold", c.gradient->threshold},
                     {"decay_rate", c.gradient->decay_rate}};
  }
  return j;
}

IntegratorConfig<double> integrator_config(const Context& ctx) {
  auto ic = ctx.config.integrator;
  ic.record_p = ctx.config.model.p;
  return ic;
}

StateField<double> initial_field(const Context& ctx, const DerivedConstants<double>& c, std::uint64_t stream) {
  const auto& ic = ctx.config.experiment.initial;
  const auto& space = ctx.model().space();
  CounterRng rng(ctx.config.seed, stream);
  const double norm = ic.norm > 0 ? ic.norm : c.r_delta;
  if (ic.kind == "random") return random_field_with_norm(ctx.grid, rng, norm, space);
  if (ic.kind == "smooth_random") return smooth_random_field(ctx.model().kernel(), rng, norm, space);
  if (ic.kind == "constant") return StateField<double>::constant(ctx.grid, ic.amplitude);
  return StateField<double>::from_function(ctx.grid, [&](const auto& x) {
    return ic.amplitude * std::sin(std::numbers::pi * ic.frequency * x.sum());
  });
}

SamplingParams<double> sampling_params(const Context& ctx) {
  const auto& e = ctx.config.experiment;
  SamplingParams<double> s;
  s.ensemble_size = e.ensemble_size;
  s.snapshots_per_member = e.snapshots_per_member;
  s.burn_in = e.burn_in;
  s.spacing = e.spacing;
  s.initial_radius = e.initial_radius;
  s.scheme = ctx.config.integrator.scheme;
  s.dt = ctx.config.integrator.dt;
  s.seed = ctx.config.seed;
  s.threads = ctx.threads;
  return s;
}

PerturbationFamily<double> perturbation_family(const Context& ctx) {
  const auto& e = ctx.config.experiment;
  PerturbationFamily<double> f;
  f.base = ctx.config.kernel.spec;
  if (e.perturbation == "width") {
    f.kind = PerturbationKind::width;
  } else if (e.perturbation == "mix") {
    f.kind = PerturbationKind::mix;
    if (e.target) {
      f.target = *e.target;
    } else {
      f.target = f.base;
      f.target.radius = 2 * f.base.radius;
    }
  } else {
    f.kind = PerturbationKind::bump;
    f.bump.width = e.bump_width;
    f.bump.center = e.bump_center;
    if (f.bump.center.empty())
      for (const auto& iv : ctx.grid->bounds()) f.bump.center.push_back((iv.lower + iv.upper) / 2);
    if (static_cast<int>(f.bump.center.size()) != ctx.grid->dimension())
      throw ConfigurationError("experiment.bump.center: expected " + std::to_string(ctx.grid->dimension()) +
                               " coordinates");
  }
  return f;
}

std::vector<double> perturbation_levels(const Context& ctx) {
  auto levels = ctx.config.experiment.levels;
  if (levels.empty())
    for (int k = 0; k <= 6; ++k) levels.push_back(std::ldexp(1.0, -k));
  return levels;
}

// -- experiments ------------------------------------------------------------

void run_validate(const Context& ctx, Outputs& out) {
  const auto report = check_hypotheses(ctx.model());
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"lhs", c.lhs},
                      {"rhs", c.rhs},
                      {"strict", c.strict},
                      {"passed", c.passed()},
                      {"witness", c.witness}});
  }
  out.results["checks"] = checks;
  out.results["constants"] = constants_json(report.constants);
  if (const auto* bad = report.first_failure()) {
    out.line("hypothesis check failed: " + bad->name);
    validate(ctx.model());
  }
  out.line("all " + std::to_string(report.checks.size()) + " hypothesis checks passed");
  out.line("r_delta = " + num(report.constants.r_delta));
  out.line("norm decay rate = " + num(report.constants.norm_decay_rate));
  if (report.constants.gradient) {
    out.line("gradient threshold = " + num(report.constants.gradient->threshold));
    out.line("gradient decay rate = " + num(report.constants.gradient->decay_rate));
  }
}

void run_simulate(const Context& ctx, Outputs& out) {
  const auto c = validate(ctx.model());
  out.results["constants"] = constants_json(c);
  const auto cfg = integrator_config(ctx);
  const auto count = ctx.config.experiment.trajectories;
  std::vector<TrajectoryRecord<double>> records(static_cast<std::size_t>(count));
  parallel_for(count, ctx.threads, [&](Index i) {
    records[static_cast<std::size_t>(i)] = integrate(ctx.model(), initial_field(ctx, c, static_cast<std::uint64_t>(i)), cfg);
  });
  json list = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string name = "trajectory_" + ctx.tag() + "_" + std::to_string(i) + ".csv";
    out.files.emplace_back(name, trajectory_csv(r));
    list.push_back({{"file", name},
                    {"initial_norms", r.lp_norms.front()},
                    {"final_norms", r.lp_norms.back()},
                    {"final_sup_norm", r.sup_norms.back()},
                    {"records", r.size()}});
    out.line("trajectory " + std::to_string(i) + ": ||u(0)|| = " + num(r.lp_norms.front()[0]) +
             ", ||u(T)|| = " + num(r.lp_norms.back()[0]));
  }
  out.results["exponents"] = ctx.config.model.p;
  out.results["t_end"] = cfg.t_end;
  out.results["trajectories"] = list;
}

void run_absorb(const Context& ctx, Outputs& out) {
  const auto c = validate(ctx.model());
  out.results["constants"] = constants_json(c);
  const auto& e = ctx.config.experiment;
  const auto cfg = integrator_config(ctx);
  std::vector<AbsorbingResult<double>> res(static_cast<std::size_t>(e.ensemble_size));
  parallel_for(e.ensemble_size, ctx.threads, [&](Index i) {
    CounterRng rng(ctx.config.seed, static_cast<std::uint64_t>(i));
    const auto u0 = random_field_with_norm(ctx.grid, rng, e.norm_factor * c.r_delta, ctx.model().space());
    res[static_cast<std::size_t>(i)] = absorbing_time(ctx.model(), u0, cfg);
  });

  std::ostringstream csv;
  csv << "member,initial_norm,entry_time,analytic_bound\n";
  json members = json::array();
  Index late = 0;
  double worst = 0;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& r = res[i];
    csv << i << ',' << num(r.initial_norm) << ',' << num(r.entry_time) << ',' << num(r.analytic_bound) << '\n';
    members.push_back({{"initial_norm", r.initial_norm},
                       {"entry_time", r.entry_time},
                       {"analytic_bound", r.analytic_bound},
                       {"within_bound", r.within_bound()}});
    if (!r.within_bound()) ++late;
    worst = std::max(worst, r.entry_time - r.analytic_bound);
  }
  const std::string name = "absorb_" + ctx.tag() + ".csv";
  out.files.emplace_back(name, csv.str());
  out.results["members"] = members;
  out.results["record_interval"] = cfg.dt * static_cast<double>(cfg.record_every);
  out.results["late_members"] = late;
  out.line(std::to_string(res.size()) + " members, " + std::to_string(late) + " entered after the analytic bound");
  out.line("largest (entry time - bound) = " + num(worst));
  if (late > 0) throw DiagnosticError(std::to_string(late) + " members entered the absorbing ball late");
}

void run_attractor(const Context& ctx, Outputs& out) {
  const auto c = validate(ctx.model());
  out.results["constants"] = constants_json(c);
  const auto sample = sample_attractor(ctx.model(), sampling_params(ctx));
  const auto& e = ctx.config.experiment;

  std::ostringstream csv;
  csv << "member,snapshot";
  for (double p : ctx.config.model.p) csv << ",norm_p" << format_exponent(p);
  csv << ",sup_norm\n";
  json norms = json::array();
  for (std::size_t k = 0; k < sample.states.size(); ++k) {
    const auto& s = sample.states[k];
    csv << k / static_cast<std::size_t>(e.snapshots_per_member) << ','
        << k % static_cast<std::size_t>(e.snapshots_per_member);
    for (double p : ctx.config.model.p) csv << ',' << num(lp_norm(s, LpSpace<double>(p)));
    csv << ',' << num(sup_norm(s)) << '\n';
    norms.push_back(lp_norm(s, ctx.model().space()));
  }
  const std::string name = "attractor_" + ctx.tag() + ".csv";
  out.files.emplace_back(name, csv.str());
  const double max_norm = sample.max_norm(ctx.model().space());
  out.results["kernel_id"] = sample.kernel_id;
  out.results["burn_in"] = sample.burn_in;
  out.results["spacing"] = sample.spacing;
  out.results["states"] = sample.size();
  out.results["norms"] = norms;
  out.results["max_norm"] = max_norm;
  out.line(std::to_string(sample.size()) + " states after burn-in " + num(sample.burn_in));
  out.line("max ||u||_p = " + num(max_norm) + " (r_delta = " + num(c.r_delta) + ")");
}

void run_continuity(const Context& ctx, Outputs& out) {
  const auto family = perturbation_family(ctx);
  const auto levels = perturbation_levels(ctx);
  ContinuityParams<double> params;
  params.sampling = sampling_params(ctx);
  params.deviation = integrator_config(ctx);
  params.deviation.record_p = {ctx.model().space().p()};
  params.tolerance_factor = ctx.config.experiment.tolerance_factor;
  params.threshold_factor = ctx.config.experiment.threshold_factor;
  const auto rep = continuity_experiment(ctx.model(), family, levels, params);

  std::ostringstream csv;
  csv << "level,perturbation_size,semidistance,deviation_ratio\n";
  for (std::size_t k = 0; k < levels.size(); ++k)
    csv << num(levels[k]) << ',' << num(rep.perturbation_sizes[k]) << ',' << num(rep.semidistances[k]) << ','
        << num(rep.deviation_ratios[k]) << '\n';
  std::ostringstream env;
  env << "t,envelope\n";
  for (std::size_t r = 0; r < rep.envelope_times.size(); ++r)
    env << num(rep.envelope_times[r]) << ',' << num(rep.gronwall_envelope[r]) << '\n';
  out.files.emplace_back("continuity_" + ctx.tag() + ".csv", csv.str());
  out.files.emplace_back("envelope_" + ctx.tag() + ".csv", env.str());

  out.results["family"] = to_string(family.kind);
  out.results["levels"] = rep.levels;
  out.results["perturbation_sizes"] = rep.perturbation_sizes;
  out.results["semidistances"] = rep.semidistances;
  out.results["deviation_ratios"] = rep.deviation_ratios;
  out.results["envelope"] = {{"fitted_c0", rep.fitted_c0}, {"lambda", rep.lambda}};
  out.results["r_delta"] = rep.r_delta;
  out.results["tolerance"] = rep.tolerance;
  out.results["threshold"] = rep.threshold;
  out.results["passed"] = rep.passed();
  for (std::size_t k = 0; k < levels.size(); ++k)
    out.line("level " + num(levels[k]) + ": ||J-J0||_1 = " + num(rep.perturbation_sizes[k]) +
             ", dist_H = " + num(rep.semidistances[k]));
  if (rep.failure) {
    out.results["failure"] = *rep.failure;
    throw DiagnosticError("continuity: " + *rep.failure);
  }
  out.line("semidistances nonincreasing within " + num(rep.tolerance) + ", final below " + num(rep.threshold));
}

void run_deviation(const Context& ctx, Outputs& out) {
  const auto c = validate(ctx.model());
  out.results["constants"] = constants_json(c);
  const auto family = perturbation_family(ctx);
  const auto levels = perturbation_levels(ctx);
  const auto base = ctx.model().with_kernel(family.assemble_at(0.0, ctx.grid));
  std::vector<KernelMatrixPtr<double>> kernels;
  for (double l : levels) kernels.push_back(family.assemble_at(l, ctx.grid));
  auto cfg = integrator_config(ctx);
  cfg.record_p = {ctx.model().space().p()};
  const auto u0 = initial_field(ctx, c, 0);
  const auto rep = deviation_experiment(base, kernels, u0, cfg, ctx.config.experiment.linearity_factor, ctx.threads);

  std::ostringstream csv;
  csv << "t";
  for (std::size_t k = 0; k < levels.size(); ++k) csv << ",d_level" << k;
  csv << '\n';
  const auto& times = rep.levels.front().times;
  for (std::size_t r = 0; r < times.size(); ++r) {
    csv << num(times[r]);
    for (const auto& lv : rep.levels) csv << ',' << num(lv.deviations[r]);
    csv << '\n';
  }
  out.files.emplace_back("deviation_" + ctx.tag() + ".csv", csv.str());

  json lv = json::array();
  for (std::size_t k = 0; k < rep.levels.size(); ++k)
    lv.push_back({{"level", levels[k]},
                  {"perturbation_size", rep.levels[k].perturbation_size},
                  {"max_deviation", rep.levels[k].max_deviation()},
                  {"ratio", rep.ratios[k]}});
  out.results["family"] = to_string(family.kind);
  out.results["levels"] = lv;
  out.results["lambda"] = rep.lambda;
  out.results["lipschitz"] = {{"gain", rep.lipschitz.gain}, {"reaction", rep.lipschitz.reaction}};
  out.results["fitted_c0"] = rep.fitted_c0;
  out.results["loglog_slope"] = std::isnan(rep.loglog_slope) ? json(nullptr) : json(rep.loglog_slope);
  out.results["linearity_spread"] = rep.linearity_spread;
  out.results["passed"] = rep.passed();
  out.line("fitted C0 = " + num(rep.fitted_c0) + ", lambda = " + num(rep.lambda));
  out.line("log-log slope = " + num(rep.loglog_slope) + ", ratio spread = " + num(rep.linearity_spread));
  if (rep.envelope_violation) {
    out.results["failure"] = *rep.envelope_violation;
    throw DiagnosticError("deviation: " + *rep.envelope_violation);
  }
  if (!rep.linear_within_factor) {
    out.results["failure"] = "deviation ratios spread beyond the linearity factor";
    throw DiagnosticError("deviation: ratio spread " + num(rep.linearity_spread) + " beyond the linearity factor");
  }
}

void run_gradient(const Context& ctx, Outputs& out) {
  if (!ctx.config.model.gradient_diagnostics)
    throw ConfigurationError("model.gradient_diagnostics must be true for the gradient experiment");
  const auto c = validate(ctx.model());
  out.results["constants"] = constants_json(c);
  GradientCheckOptions<double> opts;
  opts.tolerance = ctx.config.experiment.gradient_tolerance;
  opts.start_time = ctx.config.experiment.start_time;
  const auto u0 = initial_field(ctx, c, 0);
  const auto rep = gradient_bound_check(ctx.model(), u0, ctx.config.integrator, opts);

  std::ostringstream csv;
  const double p = ctx.model().space().p();
  csv << "t";
  for (std::size_t a = 0; a < rep.gradient_norms.size(); ++a) csv << ",grad_norm_p" << format_exponent(p) << "_axis" << a;
  csv << '\n';
  for (std::size_t r = 0; r < rep.times.size(); ++r) {
    csv << num(rep.times[r]);
    for (const auto& g : rep.gradient_norms) csv << ',' << num(g[r]);
    csv << '\n';
  }
  out.files.emplace_back("gradient_" + ctx.tag() + ".csv", csv.str());
  out.results["start_time"] = rep.start_time;
  out.results["tolerance"] = rep.tolerance;
  out.results["pairs_checked"] = rep.pairs_checked;
  out.results["measured_rate"] = rep.measured_rate ? json(*rep.measured_rate) : json(nullptr);
  out.results["passed"] = rep.passed();
  out.line("threshold = " + num(rep.constants.threshold) + ", predicted rate = " + num(rep.constants.decay_rate));
  out.line(std::to_string(rep.pairs_checked) + " record pairs above the threshold" +
           (rep.measured_rate ? ", slowest rate " + num(*rep.measured_rate) : std::string()));
  if (rep.violation) {
    out.results["failure"] = *rep.violation;
    throw DiagnosticError(*rep.violation);
  }
}

void dispatch(const Context& ctx, Outputs& out) {
  const auto& name = ctx.config.experiment.name;
  if (name == "validate") return run_validate(ctx, out);
  if (name == "simulate") return run_simulate(ctx, out);
  if (name == "absorb") return run_absorb(ctx, out);
  if (name == "attractor") return run_attractor(ctx, out);
  if (name == "continuity") return run_continuity(ctx, out);
  if (name == "deviation") return run_deviation(ctx, out);
  if (name == "gradient") return run_gradient(ctx, out);
  throw ConfigurationError("experiment.name: unknown experiment '" + name + "'");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace

GridPtr<double> make_grid(const RunConfig& config) {
  return build_grid<double>(config.grid.dimension, config.grid.bounds, config.grid.nodes_per_axis);
}

KernelMatrixPtr<double> make_kernel(const RunConfig& config, const GridPtr<double>& grid) {
  AssemblyOptions opts;
  opts.with_derivatives = config.model.gradient_diagnostics;
  opts.renormalize_rows = config.kernel.renormalize_rows;
  return std::make_shared<const KernelMatrix<double>>(assemble(Kernel<double>(config.kernel.spec), grid, opts));
}

ModelSpec<double> make_model(const RunConfig& config, const KernelMatrixPtr<double>& kernel) {
  const auto& m = config.model;
  return ModelSpec<double>(m.decay, m.reaction, m.gain, kernel, LpSpace<double>(m.p.front()), m.delta, m.mu,
                           m.gradient_diagnostics);
}

RunResult run(RunConfig config, const RunOptions& options) {
  if (options.experiment) config.experiment.name = *options.experiment;
  if (options.seed) config.seed = *options.seed;
  const RunConfig recorded = config;
  if (options.output_dir) config.output_dir = *options.output_dir;

  RunResult result;
  result.output_dir = config.output_dir;
  const auto started = std::chrono::steady_clock::now();

  Context ctx;
  ctx.config = config;
  ctx.hash = config_hash(config);
  ctx.threads = std::max(1, options.threads);
  Outputs out;
  out.results["experiment"] = config.experiment.name;
  out.results["config_hash"] = ctx.hash;

  try {
    ctx.grid = make_grid(config);
    ctx.kernel = make_kernel(config, ctx.grid);
    ctx.spec.emplace(make_model(config, ctx.kernel));
    dispatch(ctx, out);
    result.status = "ok";
  } catch (const Error& e) {
    result.exit_code = exit_code(e.kind());
    result.status = to_string(e.kind());
    result.message = e.what();
  } catch (const std::bad_alloc& e) {
    result.exit_code = exit_code(FailureClass::resource);
    result.status = to_string(FailureClass::resource);
    result.message = std::string("out of memory: ") + e.what();
  } catch (const std::exception& e) {
    result.exit_code = exit_code(FailureClass::numerical);
    result.status = "internal";
    result.message = e.what();
  }
  out.results["status"] = result.status;
  if (!result.message.empty()) out.results["message"] = result.message;
  out.results["exit_code"] = result.exit_code;

  std::ostringstream summary;
  summary << "experiment: " << config.experiment.name << "\n";
  summary << "config hash: " << ctx.hash << "\n";
  summary << "status: " << result.status << " (exit " << result.exit_code << ")\n";
  if (!result.message.empty()) summary << "message: " << result.message << "\n";
  for (const auto& l : out.summary) summary << l << "\n";
  result.summary = summary.str();

  try {
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    std::vector<std::pair<std::string, std::string>> files = out.files;
    files.emplace_back("config.yaml", serialize_config(recorded));
    files.emplace_back("results.json", out.results.dump(2) + "\n");
    files.emplace_back("summary.txt", result.summary);
    for (const auto& [name, content] : files) {
      write_file(dir / name, content);
      result.files.push_back(name);
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest = {
        {"config_hash", ctx.hash},
        {"experiment", config.experiment.name},
        {"seed", config.seed},
        {"threads", ctx.threads},
        {"status", result.status},
        {"exit_code", result.exit_code},
        {"wall_time_seconds", wall},
        {"files", result.files},
        {"versions",
         {{"nonlocal", NONLOCAL_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}}},
    };
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    result.files.push_back("manifest.json");
  } catch (const Error& e) {
    if (result.exit_code == 0) {
      result.exit_code = exit_code(e.kind());
      result.status = to_string(e.kind());
      result.message = e.what();
    }
  }
  return result;
}

}  // namespace nonlocal
