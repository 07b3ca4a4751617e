#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nonlocal/errors.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/integrator.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/model.hpp"
#include "nonlocal/parallel.hpp"
#include "nonlocal/random.hpp"

namespace nonlocal {

namespace detail {

template <typename Scalar>
std::string fmt(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ln(n0 / r) / rate, zero when n0 <= r.
template <typename Scalar>
Scalar entry_bound(Scalar n0, const DerivedConstants<Scalar>& c) {
  if (n0 <= c.r_delta) return Scalar(0);
  return std::log(n0 / c.r_delta) / c.norm_decay_rate;
}

template <typename Scalar>
Index step_count(Scalar span, Scalar dt) {
  if (span <= Scalar(0)) return 0;
  return static_cast<Index>(std::ceil(span / dt - Scalar(1e-9)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Absorbing ball entry

template <typename Scalar = double>
struct AbsorbingResult {
  Scalar entry_time = 0;
  Scalar analytic_bound = 0;
  Scalar initial_norm = 0;
  Scalar r_delta = 0;
  Scalar record_interval = 0;

  bool within_bound() const { return entry_time <= analytic_bound + record_interval * (1 + Scalar(1e-12)); }
};

/// First recorded time with ||u(t)||_p <= r_delta, against
/// ln(||u0||_p / r_delta) / ((delta / (1 + delta)) eps).
template <typename Scalar>
AbsorbingResult<Scalar> absorbing_time(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u0,
                                       const IntegratorConfig<Scalar>& config) {
  const auto constants = validate(spec);
  AbsorbingResult<Scalar> res;
  res.r_delta = constants.r_delta;
  res.initial_norm = lp_norm(u0, spec.space());
  if (!(res.initial_norm > res.r_delta)) {
    throw UsageError("absorbing_time: initial norm " + detail::fmt(res.initial_norm) +
                     " is not above r_delta " + detail::fmt(res.r_delta));
  }
  res.analytic_bound = detail::entry_bound(res.initial_norm, constants);
  res.record_interval = config.dt * Scalar(config.record_every);

  IntegratorConfig<Scalar> cfg = config;
  cfg.record_p = {spec.space().p()};
  cfg.record_gradients = false;
  cfg.snapshot_every = 0;
  std::optional<Scalar> entry;
  Scalar last_norm = res.initial_norm;
  integrate<Scalar>(spec, u0, cfg, [&](Scalar t, const StateField<Scalar>& u) {
    last_norm = lp_norm(u, spec.space());
    if (t > Scalar(0) && last_norm <= res.r_delta) {
      entry = t;
      return false;
    }
    return true;
  });
  if (!entry) {
    throw DiagnosticError("absorbing_time: trajectory did not enter the ball of radius " +
                          detail::fmt(res.r_delta) + " by t=" + detail::fmt(config.t_end) +
                          "; final norm " + detail::fmt(last_norm));
  }
  res.entry_time = *entry;
  return res;
}

// ---------------------------------------------------------------------------
// Attractor sampling

template <typename Scalar = double>
struct SamplingParams {
  Index ensemble_size = 8;
  Index snapshots_per_member = 4;
  Scalar burn_in = 0;          // 0: twice the entry bound for initial_radius
  Scalar spacing = Scalar(0.5);
  Scalar initial_radius = 0;   // 0: 2 r_delta
  Scheme scheme = Scheme::etd;
  Scalar dt = Scalar(0.01);
  std::uint64_t seed = 0;
  int threads = 1;

  void check() const {
    if (ensemble_size < 1) throw ConfigurationError("experiment.ensemble_size must be >= 1");
    if (snapshots_per_member < 1) throw ConfigurationError("experiment.snapshots_per_member must be >= 1");
    if (!(burn_in >= Scalar(0))) throw ConfigurationError("experiment.burn_in must be nonnegative");
    if (!(spacing > Scalar(0))) throw ConfigurationError("experiment.spacing must be positive");
    if (!(initial_radius >= Scalar(0))) throw ConfigurationError("experiment.initial_radius must be nonnegative");
    if (!(dt > Scalar(0))) throw ConfigurationError("integrator.dt must be positive");
  }
};

template <typename Scalar = double>
struct AttractorSample {
  std::string kernel_id;
  std::vector<StateField<Scalar>> states;
  Scalar burn_in = 0;
  Scalar spacing = 0;
  Scalar r_delta = 0;

  std::size_t size() const { return states.size(); }
  Scalar max_norm(const LpSpace<Scalar>& space) const {
    Scalar m = 0;
    for (const auto& s : states) m = std::max(m, lp_norm(s, space));
    return m;
  }
};

/// Evolves `ensemble_size` random fields of norm <= initial_radius through
/// the burn-in and keeps `snapshots_per_member` states per member, `spacing`
/// apart. Member i draws from stream i of the seed.
template <typename Scalar>
AttractorSample<Scalar> sample_attractor(const ModelSpec<Scalar>& spec, const SamplingParams<Scalar>& params) {
  params.check();
  const auto constants = validate(spec);
  const Scalar radius = params.initial_radius > Scalar(0) ? params.initial_radius : 2 * constants.r_delta;
  const Scalar needed = 2 * detail::entry_bound(radius, constants);
  const Scalar burn_in = params.burn_in > Scalar(0) ? params.burn_in : needed;
  if (burn_in < needed * (1 - Scalar(1e-12))) {
    throw ConfigurationError("experiment.burn_in " + detail::fmt(burn_in) +
                             " is below twice the entry bound " + detail::fmt(needed));
  }

  const Index burn_steps = detail::step_count(burn_in, params.dt);
  const Index gap_steps = std::max<Index>(1, detail::step_count(params.spacing, params.dt));
  const Scalar ceiling = constants.r_delta * (1 + Scalar(1e-6));
  const Stepper<Scalar> stepper(spec, params.scheme, params.dt);

  const auto members = static_cast<std::size_t>(params.ensemble_size);
  const auto per = static_cast<std::size_t>(params.snapshots_per_member);
  std::vector<StateField<Scalar>> states(members * per);
  parallel_for(params.ensemble_size, params.threads, [&](Index i) {
    CounterRng rng(params.seed, static_cast<std::uint64_t>(i));
    VectorX<Scalar> v = random_field_in_ball(spec.grid_ptr(), rng, radius, spec.space()).values();
    for (Index n = 0; n < burn_steps; ++n) stepper.advance(v);
    for (std::size_t s = 0; s < per; ++s) {
      if (s > 0)
        for (Index n = 0; n < gap_steps; ++n) stepper.advance(v);
      StateField<Scalar> u(spec.grid_ptr(), v);
      const Scalar norm = lp_norm(u, spec.space());
      if (norm > ceiling) {
        throw DiagnosticError("sample_attractor: member " + std::to_string(i) + " snapshot " +
                              std::to_string(s) + " has norm " + detail::fmt(norm) +
                              " outside the absorbing ball " + detail::fmt(constants.r_delta));
      }
      states[static_cast<std::size_t>(i) * per + s] = std::move(u);
    }
  });

  AttractorSample<Scalar> out;
  out.kernel_id = spec.kernel().id();
  out.states = std::move(states);
  out.burn_in = Scalar(burn_steps) * params.dt;
  out.spacing = Scalar(gap_steps) * params.dt;
  out.r_delta = constants.r_delta;
  return out;
}

// ---------------------------------------------------------------------------
// Hausdorff semidistance

/// max over a in A of min over b in B of ||a - b||_p.
template <typename Scalar>
Scalar hausdorff_semidistance(const std::vector<StateField<Scalar>>& A,
                              const std::vector<StateField<Scalar>>& B, const LpSpace<Scalar>& space) {
  if (A.empty() || B.empty()) throw UsageError("hausdorff_semidistance: empty sample");
  Scalar worst = 0;
  for (const auto& a : A) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (const auto& b : B) {
      require_same_grid(a.grid(), b.grid(), "hausdorff_semidistance");
      best = std::min(best, weighted_norm(a.values() - b.values(), a.grid().weights(), space.p()));
      if (best == Scalar(0)) break;
    }
    worst = std::max(worst, best);
  }
  return worst;
}

template <typename Scalar>
Scalar hausdorff_semidistance(const AttractorSample<Scalar>& A, const AttractorSample<Scalar>& B,
                              const LpSpace<Scalar>& space) {
  return hausdorff_semidistance(A.states, B.states, space);
}

// ---------------------------------------------------------------------------
// Deviation of trajectories under kernel perturbation

template <typename Scalar = double>
struct DeviationSeries {
  std::string kernel_id;
  Scalar perturbation_size = 0;  // ||J - J0||_1
  std::vector<Scalar> times;
  std::vector<Scalar> deviations;  // ||u_J(t) - u_J0(t)||_p

  Scalar max_deviation() const {
    return deviations.empty() ? Scalar(0) : *std::max_element(deviations.begin(), deviations.end());
  }
};

/// Twin trajectories from the same u0, one with spec's kernel and one with
/// `perturbed`, advanced in lockstep.
template <typename Scalar>
DeviationSeries<Scalar> deviation_series(const ModelSpec<Scalar>& spec, const KernelMatrixPtr<Scalar>& perturbed,
                                         const StateField<Scalar>& u0, const IntegratorConfig<Scalar>& config) {
  config.check();
  if (!perturbed) throw UsageError("deviation_series: null kernel");
  require_same_grid(perturbed->grid(), spec.grid(), "deviation_series");
  require_same_grid(u0.grid(), spec.grid(), "deviation_series");
  const auto twin = spec.with_kernel(perturbed);
  const Scalar p = spec.space().p();
  const auto& w = spec.grid().weights();

  DeviationSeries<Scalar> out;
  out.kernel_id = perturbed->id();
  out.perturbation_size = l1_distance(spec.kernel(), *perturbed);

  const Stepper<Scalar> base_step(spec, config.scheme, config.dt);
  const Stepper<Scalar> twin_step(twin, config.scheme, config.dt);
  VectorX<Scalar> a = u0.values();
  VectorX<Scalar> b = u0.values();
  out.times.push_back(0);
  out.deviations.push_back(0);
  const Index steps = detail::step_count(config.t_end, config.dt);
  for (Index n = 1; n <= steps; ++n) {
    const bool last = n == steps;
    const Scalar t_prev = Scalar(n - 1) * config.dt;
    const Scalar t = last ? config.t_end : Scalar(n) * config.dt;
    if (last && t - t_prev < config.dt * (1 - Scalar(1e-12))) {
      Stepper<Scalar>(spec, config.scheme, t - t_prev).advance(a);
      Stepper<Scalar>(twin, config.scheme, t - t_prev).advance(b);
    } else {
      base_step.advance(a);
      twin_step.advance(b);
    }
    if (n % config.record_every == 0 || last) {
      out.times.push_back(t);
      out.deviations.push_back(weighted_norm(a - b, w, p));
    }
  }
  return out;
}

template <typename Scalar = double>
struct DeviationReport {
  std::vector<DeviationSeries<Scalar>> levels;
  Scalar lambda = 0;  // L_g + L_f - h0
  LipschitzConstants<Scalar> lipschitz;
  Scalar fitted_c0 = 0;
  Index fit_level = -1;
  std::vector<Scalar> ratios;     // max_t d / ||J - J0||_1 per level
  Scalar loglog_slope = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar linearity_spread = 1;    // max ratio / min ratio
  bool linear_within_factor = true;
  std::optional<std::string> envelope_violation;

  bool passed() const { return linear_within_factor && !envelope_violation; }
  Scalar envelope(Scalar size, Scalar t) const { return fitted_c0 * size * std::exp(lambda * t); }
};

/// Runs the twin construction for each perturbed kernel, fits
/// C0 = max_t d(t) / (||J - J0||_1 e^{lambda t}) on the smallest nonzero
/// perturbation and checks the frozen envelope on every level. Linearity:
/// every ratio max_t d / ||J - J0||_1 lies within `linearity_factor` of the
/// ratio of the smallest level.
template <typename Scalar>
DeviationReport<Scalar> deviation_experiment(const ModelSpec<Scalar>& spec,
                                             const std::vector<KernelMatrixPtr<Scalar>>& perturbed,
                                             const StateField<Scalar>& u0, const IntegratorConfig<Scalar>& config,
                                             Scalar linearity_factor = Scalar(2), int threads = 1) {
  if (perturbed.empty()) throw UsageError("deviation_experiment: no perturbed kernels");
  const auto constants = validate(spec);
  DeviationReport<Scalar> rep;
  rep.lipschitz = lipschitz_estimate(spec, std::max(constants.r_delta, sup_norm(u0)));
  rep.lambda = rep.lipschitz.gain + rep.lipschitz.reaction - spec.decay().h0();

  rep.levels.resize(perturbed.size());
  parallel_for(static_cast<Index>(perturbed.size()), threads, [&](Index k) {
    rep.levels[static_cast<std::size_t>(k)] = deviation_series(spec, perturbed[static_cast<std::size_t>(k)], u0, config);
  });

  for (std::size_t k = 0; k < rep.levels.size(); ++k) {
    const auto& lv = rep.levels[k];
    if (lv.perturbation_size > Scalar(0) &&
        (rep.fit_level < 0 || lv.perturbation_size < rep.levels[static_cast<std::size_t>(rep.fit_level)].perturbation_size))
      rep.fit_level = static_cast<Index>(k);
  }

  if (rep.fit_level >= 0) {
    const auto& fit = rep.levels[static_cast<std::size_t>(rep.fit_level)];
    for (std::size_t r = 0; r < fit.times.size(); ++r)
      rep.fitted_c0 = std::max(rep.fitted_c0, fit.deviations[r] / (fit.perturbation_size * std::exp(rep.lambda * fit.times[r])));
  }

  for (const auto& lv : rep.levels) {
    for (std::size_t r = 0; r < lv.times.size() && !rep.envelope_violation; ++r) {
      const Scalar bound = rep.envelope(lv.perturbation_size, lv.times[r]);
      if (lv.deviations[r] > bound * (1 + Scalar(1e-12)) + std::numeric_limits<Scalar>::min()) {
        rep.envelope_violation = "envelope violated for kernel " + lv.kernel_id + " at t=" +
                                 detail::fmt(lv.times[r]) + ": d=" + detail::fmt(lv.deviations[r]) +
                                 " > " + detail::fmt(bound);
      }
    }
  }

  // Ratios and regression over levels with a nonzero perturbation.
  std::vector<Scalar> xs, ys;
  Scalar reference = 0;
  if (rep.fit_level >= 0) {
    const auto& fit = rep.levels[static_cast<std::size_t>(rep.fit_level)];
    reference = fit.max_deviation() / fit.perturbation_size;
  }
  Scalar lo = std::numeric_limits<Scalar>::infinity(), hi = 0;
  for (const auto& lv : rep.levels) {
    if (lv.perturbation_size <= Scalar(0)) {
      rep.ratios.push_back(0);
      continue;
    }
    const Scalar ratio = lv.max_deviation() / lv.perturbation_size;
    rep.ratios.push_back(ratio);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
    if (reference > Scalar(0) &&
        (ratio > reference * linearity_factor || ratio < reference / linearity_factor))
      rep.linear_within_factor = false;
    if (lv.max_deviation() > Scalar(0)) {
      xs.push_back(std::log(lv.perturbation_size));
      ys.push_back(std::log(lv.max_deviation()));
    }
  }
  if (hi > Scalar(0)) rep.linearity_spread = hi / lo;
  if (xs.size() >= 2) {
    const Scalar n = Scalar(xs.size());
    Scalar mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    Scalar sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    if (sxx > Scalar(0)) rep.loglog_slope = sxy / sxx;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Kernel perturbation families

enum class PerturbationKind { width, mix, bump };

inline const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::width: return "width";
    case PerturbationKind::mix: return "mix";
    case PerturbationKind::bump: return "bump";
  }
  return "?";
}

/// One-parameter family J_l with J_0 = base.
///   width: base with radius R (1 + l)
///   mix:   (1 - l) base + l target
///   bump:  base + l b(x) b(y)
template <typename Scalar = double>
struct PerturbationFamily {
  PerturbationKind kind = PerturbationKind::width;
  KernelSpec<Scalar> base;
  KernelSpec<Scalar> target;  // mix only
  BumpSpec<Scalar> bump;      // bump only

  Kernel<Scalar> at(Scalar level) const {
    switch (kind) {
      case PerturbationKind::width: {
        KernelSpec<Scalar> s = base;
        s.radius = base.radius * (1 + level);
        return Kernel<Scalar>(s);
      }
      case PerturbationKind::mix:
        return Kernel<Scalar>::mix(Kernel<Scalar>(base), Kernel<Scalar>(target), level);
      case PerturbationKind::bump:
        return Kernel<Scalar>(base).with_bump(bump, level);
    }
    throw UsageError("unknown perturbation family");
  }

  KernelMatrixPtr<Scalar> assemble_at(Scalar level, const GridPtr<Scalar>& grid,
                                      const AssemblyOptions& options = {}) const {
    return std::make_shared<const KernelMatrix<Scalar>>(assemble(at(level), grid, options));
  }
};

// ---------------------------------------------------------------------------
// Upper semicontinuity

template <typename Scalar = double>
struct ContinuityParams {
  SamplingParams<Scalar> sampling;
  IntegratorConfig<Scalar> deviation;  // horizon and cadence of the twin runs
  Scalar tolerance_factor = Scalar(1e-3);  // monotonicity slack, in units of r_delta
  Scalar threshold_factor = Scalar(1e-2);  // final semidistance bound, in units of r_delta
};

template <typename Scalar = double>
struct ContinuityReport {
  std::vector<Scalar> levels;
  std::vector<Scalar> perturbation_sizes;
  std::vector<Scalar> semidistances;
  std::vector<Scalar> deviation_ratios;
  std::vector<Scalar> envelope_times;
  std::vector<Scalar> gronwall_envelope;  // C0 e^{lambda t}
  Scalar fitted_c0 = 0;
  Scalar lambda = 0;
  Scalar r_delta = 0;
  Scalar tolerance = 0;
  Scalar threshold = 0;
  std::optional<std::string> failure;

  bool passed() const { return !failure; }
};

/// Samples the attractor for J_0 and for each J_level, all from the same
/// seed, and checks that dist_H(A_k, A_0) is nonincreasing in k up to
/// tolerance_factor r_delta and ends below threshold_factor r_delta.
template <typename Scalar>
ContinuityReport<Scalar> continuity_experiment(const ModelSpec<Scalar>& spec, const PerturbationFamily<Scalar>& family,
                                               const std::vector<Scalar>& levels,
                                               const ContinuityParams<Scalar>& params) {
  if (levels.size() < 3) throw ConfigurationError("experiment.levels must list at least 3 levels");
  for (Scalar l : levels)
    if (!(l >= Scalar(0))) throw ConfigurationError("experiment.levels must be nonnegative");

  const auto grid = spec.grid_ptr();
  const auto base_spec = spec.with_kernel(family.assemble_at(Scalar(0), grid));
  const auto constants = validate(base_spec);

  ContinuityReport<Scalar> rep;
  rep.levels = levels;
  rep.r_delta = constants.r_delta;
  rep.tolerance = params.tolerance_factor * constants.r_delta;
  rep.threshold = params.threshold_factor * constants.r_delta;

  std::vector<KernelMatrixPtr<Scalar>> kernels;
  for (Scalar l : levels) kernels.push_back(family.assemble_at(l, grid));

  const auto reference = sample_attractor(base_spec, params.sampling);
  for (const auto& K : kernels) {
    const auto sample = sample_attractor(base_spec.with_kernel(K), params.sampling);
    rep.perturbation_sizes.push_back(l1_distance(base_spec.kernel(), *K));
    rep.semidistances.push_back(hausdorff_semidistance(sample, reference, spec.space()));
  }

  CounterRng rng(params.sampling.seed, std::uint64_t(1) << 32);
  const auto u0 = random_field_with_norm(grid, rng, constants.r_delta, spec.space());
  const auto dev = deviation_experiment(base_spec, kernels, u0, params.deviation, Scalar(2), params.sampling.threads);
  rep.deviation_ratios = dev.ratios;
  rep.fitted_c0 = dev.fitted_c0;
  rep.lambda = dev.lambda;
  rep.envelope_times = dev.levels.front().times;
  for (Scalar t : rep.envelope_times) rep.gronwall_envelope.push_back(dev.fitted_c0 * std::exp(dev.lambda * t));

  for (std::size_t k = 0; k + 1 < levels.size() && !rep.failure; ++k) {
    if (rep.perturbation_sizes[k + 1] > rep.perturbation_sizes[k] * (1 + Scalar(1e-12)))
      rep.failure = "perturbation sizes increase between levels " + std::to_string(k) + " and " + std::to_string(k + 1);
  }
  for (std::size_t k = 0; k + 1 < levels.size() && !rep.failure; ++k) {
    if (rep.semidistances[k + 1] > rep.semidistances[k] + rep.tolerance) {
      rep.failure = "semidistance increases between levels " + std::to_string(k) + " and " + std::to_string(k + 1) +
                    ": " + detail::fmt(rep.semidistances[k]) + " -> " + detail::fmt(rep.semidistances[k + 1]);
    }
  }
  if (!rep.failure && rep.semidistances.back() > rep.threshold) {
    rep.failure = "final semidistance " + detail::fmt(rep.semidistances.back()) + " exceeds " + detail::fmt(rep.threshold);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gradient contraction

template <typename Scalar = double>
struct GradientCheckOptions {
  std::optional<Scalar> tolerance;   // default 10 dt
  std::optional<Scalar> start_time;  // default twice the entry bound for u0
};

template <typename Scalar = double>
struct GradientReport {
  GradientConstants<Scalar> constants;
  Scalar r_delta = 0;
  Scalar start_time = 0;
  Scalar tolerance = 0;
  std::vector<Scalar> times;
  std::vector<std::vector<Scalar>> gradient_norms;  // per axis
  Index pairs_checked = 0;
  std::optional<Scalar> measured_rate;  // slowest contraction over checked pairs
  std::optional<std::string> violation;

  bool passed() const { return !violation; }
};

/// For consecutive records at t >= start_time with both gradient norms above
/// the threshold, the rate -ln(g1 / g0) / (t1 - t0) must be at least the
/// predicted rate minus the tolerance.
template <typename Scalar>
GradientReport<Scalar> gradient_bound_check(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u0,
                                            const IntegratorConfig<Scalar>& config,
                                            const GradientCheckOptions<Scalar>& options = {}) {
  if (!spec.gradient_diagnostics())
    throw UsageError("gradient_bound_check: spec was built without gradient diagnostics");
  const auto constants = validate(spec);
  GradientReport<Scalar> rep;
  rep.constants = *constants.gradient;
  rep.r_delta = constants.r_delta;
  rep.tolerance = options.tolerance.value_or(10 * config.dt);
  rep.start_time = options.start_time.value_or(2 * detail::entry_bound(lp_norm(u0, spec.space()), constants));

  IntegratorConfig<Scalar> cfg = config;
  cfg.record_p = {spec.space().p()};
  cfg.record_gradients = true;
  const auto rec = integrate(spec, u0, cfg);
  rep.times = rec.times;
  const int dim = spec.grid().dimension();
  for (int a = 0; a < dim; ++a) rep.gradient_norms.push_back(rec.gradient_series(0, a));

  const Scalar threshold = rep.constants.threshold;
  const Scalar floor = rep.constants.decay_rate - rep.tolerance;
  for (int a = 0; a < dim; ++a) {
    const auto& g = rep.gradient_norms[static_cast<std::size_t>(a)];
    for (std::size_t r = 0; r + 1 < g.size(); ++r) {
      if (rep.times[r] < rep.start_time) continue;
      if (!(g[r] > threshold && g[r + 1] > threshold)) continue;
      const Scalar rate = -std::log(g[r + 1] / g[r]) / (rep.times[r + 1] - rep.times[r]);
      ++rep.pairs_checked;
      rep.measured_rate = rep.measured_rate ? std::min(*rep.measured_rate, rate) : rate;
      if (rate < floor && !rep.violation) {
        rep.violation = "gradient contraction on axis " + std::to_string(a) + " between t=" + detail::fmt(rep.times[r]) +
                        " and t=" + detail::fmt(rep.times[r + 1]) + ": rate " + detail::fmt(rate) + " < " +
                        detail::fmt(floor);
      }
    }
  }
  return rep;
}

}  // namespace nonlocal
