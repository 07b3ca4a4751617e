#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "nonlocal/errors.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/model.hpp"
#include "nonlocal/parallel.hpp"
#include "nonlocal/random.hpp"

namespace nonlocal {

enum class Scheme { etd, rk4 };

inline const char* to_string(Scheme s) { return s == Scheme::etd ? "etd" : "rk4"; }

template <typename Scalar = double>
struct IntegratorConfig {
  Scheme scheme = Scheme::etd;
  Scalar dt = Scalar(0.01);
  Scalar t_end = Scalar(1);
  Index record_every = 1;
  Index snapshot_every = 0;        // 0: no snapshots
  std::vector<Scalar> record_p;    // empty: the model's phase-space exponent
  bool record_gradients = false;

  friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;

  void check() const {
    if (!(dt > Scalar(0)) || !std::isfinite(static_cast<double>(dt)))
      throw ConfigurationError("integrator.dt must be positive");
    if (!(t_end >= Scalar(0)) || !std::isfinite(static_cast<double>(t_end)))
      throw ConfigurationError("integrator.t_end must be nonnegative");
    if (t_end > Scalar(0) && dt > t_end)
      throw ConfigurationError("integrator.dt must not exceed integrator.t_end");
    if (record_every < 1) throw ConfigurationError("integrator.record_every must be >= 1");
    if (snapshot_every < 0) throw ConfigurationError("integrator.snapshot_every must be >= 0");
    for (Scalar p : record_p) LpSpace<Scalar>{p};
  }
};

/// Norm time series of one trajectory. Row r of lp_norms holds one value per
/// entry of `exponents`; row r of grad_lp_norms holds exponent-major,
/// axis-minor values.
template <typename Scalar = double>
struct TrajectoryRecord {
  int dimension = 1;
  std::vector<Scalar> exponents;
  std::vector<Scalar> times;
  std::vector<std::vector<Scalar>> lp_norms;
  std::vector<std::vector<Scalar>> grad_lp_norms;
  std::vector<Scalar> sup_norms;
  std::vector<Scalar> snapshot_times;
  std::vector<StateField<Scalar>> snapshots;
  StateField<Scalar> final_state;

  std::size_t size() const { return times.size(); }
  bool has_gradients() const { return !grad_lp_norms.empty(); }
  /// Column of norms for exponent index k.
  std::vector<Scalar> norm_series(std::size_t k = 0) const {
    std::vector<Scalar> out;
    out.reserve(lp_norms.size());
    for (const auto& row : lp_norms) out.push_back(row.at(k));
    return out;
  }
  std::vector<Scalar> gradient_series(std::size_t k, int axis) const {
    std::vector<Scalar> out;
    for (const auto& row : grad_lp_norms) out.push_back(row.at(k * dimension + axis));
    return out;
  }
};

namespace detail {

// (1 - e^{-z}) / z, series branch near zero.
template <typename Scalar>
Scalar phi1(Scalar z) {
  if (std::abs(z) < Scalar(1e-4)) return Scalar(1) - z / Scalar(2) + z * z / Scalar(6) - z * z * z / Scalar(24);
  return -std::expm1(-z) / z;
}

}  // namespace detail

/// Fixed-step propagator with cached per-node coefficients.
///
/// etd: u <- e^{-h dt} u + dt phi1(h dt) [g(K u) + f(x, u)], the variation of
/// constants formula with the bracket frozen at the left end point.
/// rk4: classical four-stage Runge-Kutta on u' = F(u).
template <typename Scalar = double>
class Stepper {
 public:
  Stepper(const ModelSpec<Scalar>& spec, Scheme scheme, Scalar dt)
      : spec_(&spec), scheme_(scheme), dt_(dt) {
    if (!(dt > Scalar(0))) throw UsageError("step size must be positive");
    if (scheme_ == Scheme::etd) {
      const auto& h = spec.decay().values();
      decay_.resize(h.size());
      forcing_.resize(h.size());
      for (Index i = 0; i < h.size(); ++i) {
        decay_[i] = std::exp(-h[i] * dt);
        forcing_[i] = dt * detail::phi1(h[i] * dt);
      }
    }
  }

  Scalar dt() const { return dt_; }

  void advance(VectorX<Scalar>& u) const {
    if (scheme_ == Scheme::etd) {
      const VectorX<Scalar> N = nonlinear_values(*spec_, u);
      u = decay_.cwiseProduct(u) + forcing_.cwiseProduct(N);
    } else {
      const VectorX<Scalar> k1 = rhs_values(*spec_, u);
      const VectorX<Scalar> k2 = rhs_values(*spec_, u + (dt_ / 2) * k1);
      const VectorX<Scalar> k3 = rhs_values(*spec_, u + (dt_ / 2) * k2);
      const VectorX<Scalar> k4 = rhs_values(*spec_, u + dt_ * k3);
      u += (dt_ / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    for (Index i = 0; i < u.size(); ++i) {
      if (!std::isfinite(static_cast<double>(u[i])))
        throw NumericalError("step produced a non-finite value at node " + std::to_string(i));
    }
  }

 private:
  const ModelSpec<Scalar>* spec_;
  Scheme scheme_;
  Scalar dt_;
  VectorX<Scalar> decay_;
  VectorX<Scalar> forcing_;
};

template <typename Scalar>
StateField<Scalar> step_etd(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u, Scalar dt) {
  require_same_grid(spec.grid(), u.grid(), "step_etd");
  VectorX<Scalar> v = u.values();
  Stepper<Scalar>(spec, Scheme::etd, dt).advance(v);
  return StateField<Scalar>(u.grid_ptr(), std::move(v));
}

template <typename Scalar>
StateField<Scalar> step_rk4(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u, Scalar dt) {
  require_same_grid(spec.grid(), u.grid(), "step_rk4");
  VectorX<Scalar> v = u.values();
  Stepper<Scalar>(spec, Scheme::rk4, dt).advance(v);
  return StateField<Scalar>(u.grid_ptr(), std::move(v));
}

/// Called at every record time with (t, state); returning false stops the run.
template <typename Scalar>
using RecordObserver = std::function<bool(Scalar, const StateField<Scalar>&)>;

template <typename Scalar>
TrajectoryRecord<Scalar> integrate(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u0,
                                   const IntegratorConfig<Scalar>& config,
                                   const RecordObserver<Scalar>& observer = {}) {
  config.check();
  require_same_grid(spec.grid(), u0.grid(), "integrate");

  TrajectoryRecord<Scalar> rec;
  const int dim = spec.grid().dimension();
  rec.dimension = dim;
  rec.exponents = config.record_p.empty() ? std::vector<Scalar>{spec.space().p()} : config.record_p;
  std::vector<LpSpace<Scalar>> spaces;
  for (Scalar p : rec.exponents) spaces.emplace_back(p);

  auto record = [&](Scalar t, const StateField<Scalar>& u) {
    rec.times.push_back(t);
    std::vector<Scalar> norms;
    for (const auto& sp : spaces) norms.push_back(lp_norm(u, sp));
    rec.lp_norms.push_back(std::move(norms));
    if (config.record_gradients) {
      std::vector<StateField<Scalar>> grads;
      for (int a = 0; a < dim; ++a) grads.push_back(discrete_gradient(u, a));
      std::vector<Scalar> row;
      for (const auto& sp : spaces)
        for (int a = 0; a < dim; ++a) row.push_back(lp_norm(grads[a], sp));
      rec.grad_lp_norms.push_back(std::move(row));
    }
    rec.sup_norms.push_back(sup_norm(u));
    return observer ? observer(t, u) : true;
  };
  auto snapshot = [&](Scalar t, const StateField<Scalar>& u) {
    rec.snapshot_times.push_back(t);
    rec.snapshots.push_back(u);
  };

  const Scalar dt = config.dt;
  Index steps = 0;
  if (config.t_end > Scalar(0)) steps = static_cast<Index>(std::ceil(config.t_end / dt - Scalar(1e-9)));
  const Stepper<Scalar> stepper(spec, config.scheme, dt);

  StateField<Scalar> u = u0;
  bool keep_going = record(Scalar(0), u);
  if (config.snapshot_every > 0) snapshot(Scalar(0), u);

  VectorX<Scalar> v = u0.values();
  for (Index n = 1; n <= steps && keep_going; ++n) {
    const bool last = n == steps;
    const Scalar t_prev = Scalar(n - 1) * dt;
    const Scalar t = last ? config.t_end : Scalar(n) * dt;
    try {
      if (last && t - t_prev < dt * (Scalar(1) - Scalar(1e-12))) {
        Stepper<Scalar>(spec, config.scheme, t - t_prev).advance(v);
      } else {
        stepper.advance(v);
      }
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os.precision(17);
      os << e.what() << " (step ending at t=" << t << ")";
      throw NumericalError(os.str());
    }
    const bool want_record = n % config.record_every == 0 || last;
    const bool want_snap = config.snapshot_every > 0 && (n % config.snapshot_every == 0);
    if (want_record || want_snap) {
      u = StateField<Scalar>(u0.grid_ptr(), v);
      if (want_record) keep_going = record(t, u);
      if (want_snap) snapshot(t, u);
    }
  }
  rec.final_state = StateField<Scalar>(u0.grid_ptr(), v);
  return rec;
}

/// `count` trajectories from random fields with ||u0||_p <= radius; member i
/// draws from stream i of `seed`, so the result does not depend on `threads`.
template <typename Scalar>
std::vector<TrajectoryRecord<Scalar>> integrate_ensemble(const ModelSpec<Scalar>& spec,
                                                         std::uint64_t seed, Index count,
                                                         Scalar radius,
                                                         const IntegratorConfig<Scalar>& config,
                                                         int threads = 1) {
  if (count < 1) throw UsageError("integrate_ensemble: count must be >= 1");
  if (!(radius >= Scalar(0))) throw UsageError("integrate_ensemble: radius must be nonnegative");
  std::vector<TrajectoryRecord<Scalar>> out(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](Index i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const auto u0 = random_field_in_ball(spec.grid_ptr(), rng, radius, spec.space());
    out[static_cast<std::size_t>(i)] = integrate(spec, u0, config);
  });
  return out;
}

/// 17 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Shortest round-trip representation, used for exponents in column names.
inline std::string format_exponent(double p) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, p);
  return std::string(buf, res.ptr);
}

/// t,norm_p{p}...,grad_norm_p{p}_axis{i}...,sup_norm
template <typename Scalar>
std::string trajectory_csv(const TrajectoryRecord<Scalar>& rec) {
  std::ostringstream os;
  os << "t";
  for (Scalar p : rec.exponents) os << ",norm_p" << format_exponent(static_cast<double>(p));
  if (rec.has_gradients()) {
    for (Scalar p : rec.exponents)
      for (int a = 0; a < rec.dimension; ++a)
        os << ",grad_norm_p" << format_exponent(static_cast<double>(p)) << "_axis" << a;
  }
  os << ",sup_norm\n";
  for (std::size_t r = 0; r < rec.size(); ++r) {
    os << format_number(static_cast<double>(rec.times[r]));
    for (Scalar v : rec.lp_norms[r]) os << ',' << format_number(static_cast<double>(v));
    if (rec.has_gradients())
      for (Scalar v : rec.grad_lp_norms[r]) os << ',' << format_number(static_cast<double>(v));
    os << ',' << format_number(static_cast<double>(rec.sup_norms[r])) << '\n';
  }
  return os.str();
}

}  // namespace nonlocal
