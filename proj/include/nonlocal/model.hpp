#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nonlocal/errors.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/kernel.hpp"

namespace nonlocal {

// Spatial profiles of h and f depend on x through coordinate_sum(x) = x_1 + ... + x_N,
// so every partial derivative d/dx_i is the same derivative in that sum.

enum class DecayFamily { constant, affine };
enum class ReactionFamily { zero, saturated_affine, linear_saturated };
enum class GainFamily { zero, linear, scaled_tanh };

/// h(x) = h0 (constant) or h0 + h1 * (coordinate_sum(x) - coordinate_sum(lower corner)),
/// so that h0 is the minimum of h over the closed box.
template <typename Scalar = double>
struct DecaySpec {
  DecayFamily family = DecayFamily::constant;
  Scalar h0 = Scalar(1);
  Scalar h1 = Scalar(0);

  friend bool operator==(const DecaySpec&, const DecaySpec&) = default;
};

/// h sampled on a grid, together with its lower bounds and W^{1,inf} norm.
template <typename Scalar = double>
class DecayField {
 public:
  DecayField() = default;
  DecayField(const DecaySpec<Scalar>& spec, const Grid<Scalar>& grid) : spec_(spec) {
    if (!(spec.h0 > Scalar(0))) throw ConfigurationError("model.h0 must be positive");
    if (spec.family == DecayFamily::affine && !(spec.h1 >= Scalar(0)))
      throw ConfigurationError("model.h1 must be nonnegative");
    Scalar lo = 0, hi = 0;
    for (const auto& iv : grid.bounds()) {
      lo += iv.lower;
      hi += iv.upper;
    }
    lower_sum_ = lo;
    const Scalar slope = spec.family == DecayFamily::affine ? spec.h1 : Scalar(0);
    values_.resize(grid.size());
    for (Index k = 0; k < grid.size(); ++k) values_[k] = at(grid.node(k).sum());
    sup_ = spec.h0 + slope * (hi - lo);
    w1inf_ = sup_ + Scalar(grid.dimension()) * slope;
  }

  Scalar at(Scalar coordinate_sum) const {
    if (spec_.family == DecayFamily::constant) return spec_.h0;
    return spec_.h0 + spec_.h1 * (coordinate_sum - lower_sum_);
  }

  const DecaySpec<Scalar>& spec() const { return spec_; }
  DecayFamily family() const { return spec_.family; }
  Scalar h0() const { return spec_.h0; }
  Scalar h1() const { return spec_.family == DecayFamily::affine ? spec_.h1 : Scalar(0); }
  const VectorX<Scalar>& values() const { return values_; }
  Scalar sup_norm() const { return sup_; }
  /// ||h||_inf + sum_i ||d_i h||_inf over the closed box.
  Scalar w1inf_norm() const { return w1inf_; }

 private:
  DecaySpec<Scalar> spec_;
  VectorX<Scalar> values_;
  Scalar lower_sum_ = 0;
  Scalar sup_ = 0;
  Scalar w1inf_ = 0;
};

/// f(x, s). saturated_affine: alpha(x) tanh(s) + beta(x);
/// linear_saturated: a s / (1 + s^2) + beta(x). With
///   alpha(x) = alpha + alpha_slope * c(x)
///   beta(x)  = beta + beta_slope * c(x) + beta_cos * cos(pi * beta_freq * c(x))
/// where c(x) is the coordinate sum. k_f, c_f are the declared growth constants.
template <typename Scalar = double>
struct ReactionSpec {
  ReactionFamily family = ReactionFamily::zero;
  Scalar alpha = 0;
  Scalar alpha_slope = 0;
  Scalar a = 0;
  Scalar beta = 0;
  Scalar beta_slope = 0;
  Scalar beta_cos = 0;
  Scalar beta_freq = 1;
  Scalar k_f = 0;
  Scalar c_f = 0;

  friend bool operator==(const ReactionSpec&, const ReactionSpec&) = default;

  Scalar forcing(Scalar c) const {
    using std::numbers::pi_v;
    return beta + beta_slope * c + beta_cos * std::cos(pi_v<Scalar> * beta_freq * c);
  }
  Scalar forcing_slope(Scalar c) const {
    using std::numbers::pi_v;
    return beta_slope - beta_cos * pi_v<Scalar> * beta_freq * std::sin(pi_v<Scalar> * beta_freq * c);
  }

  Scalar value(Scalar c, Scalar s) const {
    switch (family) {
      case ReactionFamily::zero: return 0;
      case ReactionFamily::saturated_affine: return (alpha + alpha_slope * c) * std::tanh(s) + forcing(c);
      case ReactionFamily::linear_saturated: return a * s / (Scalar(1) + s * s) + forcing(c);
    }
    return 0;
  }
  /// d f / d s
  Scalar d_state(Scalar c, Scalar s) const {
    switch (family) {
      case ReactionFamily::zero: return 0;
      case ReactionFamily::saturated_affine: {
        const Scalar t = std::tanh(s);
        return (alpha + alpha_slope * c) * (Scalar(1) - t * t);
      }
      case ReactionFamily::linear_saturated: {
        const Scalar q = Scalar(1) + s * s;
        return a * (Scalar(1) - s * s) / (q * q);
      }
    }
    return 0;
  }
  /// d f / d x_i (identical for every axis)
  Scalar d_space(Scalar c, Scalar s) const {
    switch (family) {
      case ReactionFamily::zero: return 0;
      case ReactionFamily::saturated_affine: return alpha_slope * std::tanh(s) + forcing_slope(c);
      case ReactionFamily::linear_saturated: return forcing_slope(c);
    }
    return 0;
  }
};

/// g(s): zero, linear gamma*s, or scaled_tanh a*tanh(b*s).
template <typename Scalar = double>
struct GainSpec {
  GainFamily family = GainFamily::zero;
  Scalar gamma = 0;
  Scalar a = 0;
  Scalar b = 1;
  Scalar k_g = 0;
  Scalar c_g = 0;

  friend bool operator==(const GainSpec&, const GainSpec&) = default;

  Scalar value(Scalar s) const {
    switch (family) {
      case GainFamily::zero: return 0;
      case GainFamily::linear: return gamma * s;
      case GainFamily::scaled_tanh: return a * std::tanh(b * s);
    }
    return 0;
  }
  Scalar derivative(Scalar s) const {
    switch (family) {
      case GainFamily::zero: return 0;
      case GainFamily::linear: return gamma;
      case GainFamily::scaled_tanh: {
        const Scalar t = std::tanh(b * s);
        return a * b * (Scalar(1) - t * t);
      }
    }
    return 0;
  }
};

/// Problem data (h, f, g, J) on a grid plus the phase-space exponent and the
/// free parameters delta (absorbing radius inflation) and mu (gradient
/// threshold inflation). Immutable once constructed.
template <typename Scalar = double>
class ModelSpec {
 public:
  ModelSpec(DecaySpec<Scalar> decay, ReactionSpec<Scalar> reaction, GainSpec<Scalar> gain,
            KernelMatrixPtr<Scalar> kernel, LpSpace<Scalar> space, Scalar delta, Scalar mu,
            bool gradient_diagnostics = false)
      : reaction_(reaction),
        gain_(gain),
        kernel_(std::move(kernel)),
        space_(space),
        delta_(delta),
        mu_(mu),
        gradient_diagnostics_(gradient_diagnostics) {
    if (!kernel_) throw UsageError("ModelSpec requires a kernel matrix");
    decay_ = DecayField<Scalar>(decay, kernel_->grid());
    coordinate_sum_ = kernel_->grid().nodes().colwise().sum().transpose();
  }

  ModelSpec with_kernel(KernelMatrixPtr<Scalar> kernel) const {
    if (!kernel) throw UsageError("with_kernel: null kernel");
    require_same_grid(kernel->grid(), grid(), "with_kernel");
    ModelSpec copy = *this;
    copy.kernel_ = std::move(kernel);
    return copy;
  }
  ModelSpec with_space(LpSpace<Scalar> space) const {
    ModelSpec copy = *this;
    copy.space_ = space;
    return copy;
  }

  const DecayField<Scalar>& decay() const { return decay_; }
  const ReactionSpec<Scalar>& reaction() const { return reaction_; }
  const GainSpec<Scalar>& gain() const { return gain_; }
  const KernelMatrix<Scalar>& kernel() const { return *kernel_; }
  const KernelMatrixPtr<Scalar>& kernel_ptr() const { return kernel_; }
  const Grid<Scalar>& grid() const { return kernel_->grid(); }
  const GridPtr<Scalar>& grid_ptr() const { return kernel_->grid_ptr(); }
  const LpSpace<Scalar>& space() const { return space_; }
  Scalar delta() const { return delta_; }
  Scalar mu() const { return mu_; }
  bool gradient_diagnostics() const { return gradient_diagnostics_; }
  const VectorX<Scalar>& coordinate_sum() const { return coordinate_sum_; }

 private:
  DecayField<Scalar> decay_;
  ReactionSpec<Scalar> reaction_;
  GainSpec<Scalar> gain_;
  KernelMatrixPtr<Scalar> kernel_;
  LpSpace<Scalar> space_;
  Scalar delta_;
  Scalar mu_;
  bool gradient_diagnostics_;
  VectorX<Scalar> coordinate_sum_;
};

template <typename Scalar = double>
struct GradientConstants {
  Scalar epsilon = 0;     // h0 - (k_f r_delta + c_f)
  Scalar bound_M = 0;
  Scalar threshold = 0;   // M (1 + mu) / epsilon
  Scalar decay_rate = 0;  // mu / (1 + mu) * epsilon
};

template <typename Scalar = double>
struct DerivedConstants {
  Scalar r_delta = 0;
  Scalar epsilon = 0;          // h0 - k_f - k_g
  Scalar norm_decay_rate = 0;  // delta / (1 + delta) * epsilon
  std::optional<GradientConstants<Scalar>> gradient;
};

/// One checked inequality lhs < rhs (strict) or lhs <= rhs.
template <typename Scalar = double>
struct InequalityCheck {
  std::string name;
  Scalar lhs = 0;
  Scalar rhs = 0;
  bool strict = false;
  std::string witness;

  Scalar slack() const { return rhs - lhs; }
  bool passed() const {
    if (strict) return lhs < rhs;
    return lhs <= rhs + Scalar(1e-12) * std::max(Scalar(1), std::abs(rhs));
  }
};

template <typename Scalar = double>
struct ValidationReport {
  std::vector<InequalityCheck<Scalar>> checks;
  DerivedConstants<Scalar> constants;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
  }
  const InequalityCheck<Scalar>* first_failure() const {
    for (const auto& c : checks)
      if (!c.passed()) return &c;
    return nullptr;
  }
};

namespace detail {

// Cubic spacing concentrates samples near s = 0, where saturating families
// attain their largest derivatives; the ends reach +-s_max. Odd count so s = 0
// is sampled exactly.
template <typename Scalar>
std::vector<Scalar> state_lattice(Index count, Scalar s_max) {
  if (count % 2 == 0) ++count;
  std::vector<Scalar> s(count);
  const Index half = count / 2;
  for (Index k = 0; k < count; ++k) {
    const Scalar t = Scalar(k - half) / Scalar(half);
    s[k] = s_max * t * t * t;
  }
  return s;
}

// Coordinate sums of a tensor lattice over the closed box, endpoints included.
template <typename Scalar>
std::vector<Scalar> coordinate_sum_lattice(const Grid<Scalar>& grid, Index per_axis) {
  std::vector<Scalar> sums{Scalar(0)};
  for (const auto& iv : grid.bounds()) {
    std::vector<Scalar> next;
    for (Scalar base : sums)
      for (Index k = 0; k < per_axis; ++k)
        next.push_back(base + iv.lower + iv.length() * Scalar(k) / Scalar(per_axis - 1));
    sums = std::move(next);
  }
  return sums;
}

template <typename Scalar>
std::string format_witness(Scalar c, Scalar s) {
  std::ostringstream os;
  os.precision(17);
  os << "coordinate_sum=" << c << " s=" << s;
  return os.str();
}

}  // namespace detail

/// Every hypothesis the toolkit relies on, evaluated without throwing.
template <typename Scalar>
ValidationReport<Scalar> check_hypotheses(const ModelSpec<Scalar>& spec) {
  ValidationReport<Scalar> report;
  auto& checks = report.checks;
  const auto& f = spec.reaction();
  const auto& g = spec.gain();
  const auto& h = spec.decay();
  const auto& grid = spec.grid();
  const Scalar omega = grid.measure();

  checks.push_back({"k_f > 0", Scalar(0), f.k_f, true, {}});
  checks.push_back({"c_f > 0", Scalar(0), f.c_f, true, {}});
  checks.push_back({"k_g > 0", Scalar(0), g.k_g, true, {}});
  checks.push_back({"c_g > 0", Scalar(0), g.c_g, true, {}});
  checks.push_back({"delta > 0", Scalar(0), spec.delta(), true, {}});
  checks.push_back({"mu > 0", Scalar(0), spec.mu(), true, {}});
  checks.push_back({"k_f + k_g < h_0", f.k_f + g.k_g, h.h0(), true, {}});
  checks.push_back({"h(x) >= h_0 at nodes", h.h0(), h.values().minCoeff(), false, {}});

  // Sampled growth bounds on a 10^4-point (x, s) lattice with |s| <= 1e3.
  const Index per_axis = grid.dimension() == 1 ? 10 : 4;
  const auto sums = detail::coordinate_sum_lattice(grid, per_axis);
  const Index s_count = Index(10000) / static_cast<Index>(sums.size());
  const auto states = detail::state_lattice<Scalar>(s_count, Scalar(1000));

  auto sampled = [&](const std::string& name, Scalar k, Scalar c, auto&& fn, bool spatial) {
    InequalityCheck<Scalar> worst{name, 0, 0, false, {}};
    bool first = true;
    const std::vector<Scalar> only_zero{Scalar(0)};
    for (Scalar cs : spatial ? sums : only_zero) {
      for (Scalar s : states) {
        const Scalar lhs = std::abs(fn(cs, s));
        const Scalar rhs = k * std::abs(s) + c;
        if (first || rhs - lhs < worst.slack()) {
          worst.lhs = lhs;
          worst.rhs = rhs;
          worst.witness = detail::format_witness(cs, s);
          first = false;
        }
      }
    }
    checks.push_back(worst);
  };
  sampled("|f(x,s)| <= k_f|s| + c_f", f.k_f, f.c_f,
          [&](Scalar cs, Scalar s) { return f.value(cs, s); }, true);
  sampled("|d2 f(x,s)| <= k_f|s| + c_f", f.k_f, f.c_f,
          [&](Scalar cs, Scalar s) { return f.d_state(cs, s); }, true);
  sampled("|d1 f(x,s)| <= k_f|s| + c_f", f.k_f, f.c_f,
          [&](Scalar cs, Scalar s) { return f.d_space(cs, s); }, true);
  sampled("|g(s)| <= k_g|s| + c_g", g.k_g, g.c_g, [&](Scalar, Scalar s) { return g.value(s); },
          false);
  sampled("|g'(s)| <= k_g|s| + c_g", g.k_g, g.c_g,
          [&](Scalar, Scalar s) { return g.derivative(s); }, false);

  auto& dc = report.constants;
  dc.epsilon = h.h0() - f.k_f - g.k_g;
  if (dc.epsilon > Scalar(0)) {
    dc.r_delta = (f.c_f + g.c_g) * (Scalar(1) + spec.delta()) * std::max(Scalar(1), omega) / dc.epsilon;
    dc.norm_decay_rate = spec.delta() / (Scalar(1) + spec.delta()) * dc.epsilon;
  }

  if (spec.gradient_diagnostics()) {
    checks.push_back({"d_i h(x) >= h_1 > 0 (affine h)", Scalar(0),
                      h.family() == DecayFamily::affine ? h.h1() : Scalar(0), true, {}});
    checks.push_back({"h_0 > k_f r_delta + c_f", f.k_f * dc.r_delta + f.c_f, h.h0(), true, {}});
    checks.push_back({"kernel derivatives assembled", Scalar(0),
                      spec.kernel().has_derivatives() ? Scalar(1) : Scalar(0), true, {}});
    const Scalar grad_eps = h.h0() - (f.k_f * dc.r_delta + f.c_f);
    if (grad_eps > Scalar(0) && dc.epsilon > Scalar(0) && spec.kernel().has_derivatives()) {
      const Scalar p = spec.space().p();
      const Scalar pc = spec.space().conjugate();
      const Scalar omega_p = std::pow(omega, Scalar(1) / p);
      const Scalar r = dc.r_delta;
      Scalar M = 0;
      for (int axis = 0; axis < grid.dimension(); ++axis) {
        const Scalar dJ = spec.kernel().derivative_norm(axis, pc);
        const Scalar m = (r * dJ * (g.k_g * r + g.c_g * omega_p) + (f.k_f * r + f.c_f * omega_p) +
                          p * r * h.w1inf_norm()) /
                         p;
        M = std::max(M, m);
      }
      GradientConstants<Scalar> gc;
      gc.epsilon = grad_eps;
      gc.bound_M = M;
      gc.threshold = M * (Scalar(1) + spec.mu()) / grad_eps;
      gc.decay_rate = spec.mu() / (Scalar(1) + spec.mu()) * grad_eps;
      dc.gradient = gc;
    }
  }
  return report;
}

/// Throws HypothesisError naming the first failing inequality.
template <typename Scalar>
DerivedConstants<Scalar> validate(const ModelSpec<Scalar>& spec) {
  auto report = check_hypotheses(spec);
  if (const auto* bad = report.first_failure()) {
    std::ostringstream os;
    os.precision(17);
    os << "hypothesis violated: " << bad->name << " (lhs=" << bad->lhs << ", rhs=" << bad->rhs << ")";
    if (!bad->witness.empty()) os << " witness " << bad->witness;
    throw HypothesisError(os.str());
  }
  return report.constants;
}

/// F(u) = -h u + g(K_J u) + f(x, u) on raw node values.
template <typename Scalar, typename Derived>
VectorX<Scalar> rhs_values(const ModelSpec<Scalar>& spec, const Eigen::MatrixBase<Derived>& u) {
  const VectorX<Scalar> Ku = apply_values(spec.kernel(), u);
  const auto& h = spec.decay().values();
  const auto& cs = spec.coordinate_sum();
  const auto& f = spec.reaction();
  const auto& g = spec.gain();
  VectorX<Scalar> out(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    out[i] = -h[i] * u[i] + g.value(Ku[i]) + f.value(cs[i], u[i]);
    if (!std::isfinite(static_cast<double>(out[i]))) {
      throw NumericalError("eval_rhs: non-finite value at node " + std::to_string(i));
    }
  }
  return out;
}

/// Nonlinear part g(K_J u) + f(x, u) only.
template <typename Scalar, typename Derived>
VectorX<Scalar> nonlinear_values(const ModelSpec<Scalar>& spec, const Eigen::MatrixBase<Derived>& u) {
  const VectorX<Scalar> Ku = apply_values(spec.kernel(), u);
  const auto& cs = spec.coordinate_sum();
  const auto& f = spec.reaction();
  const auto& g = spec.gain();
  VectorX<Scalar> out(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    out[i] = g.value(Ku[i]) + f.value(cs[i], u[i]);
    if (!std::isfinite(static_cast<double>(out[i]))) {
      throw NumericalError("nonlinear term: non-finite value at node " + std::to_string(i));
    }
  }
  return out;
}

template <typename Scalar>
StateField<Scalar> eval_rhs(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u) {
  require_same_grid(spec.grid(), u.grid(), "eval_rhs");
  return StateField<Scalar>(u.grid_ptr(), rhs_values(spec, u.values()));
}

/// DF(u) v = -h v + g'(K_J u) K_J v + d2 f(x, u) v
template <typename Scalar>
StateField<Scalar> apply_derivative(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u,
                                    const StateField<Scalar>& v) {
  require_same_grid(spec.grid(), u.grid(), "apply_derivative");
  require_same_grid(spec.grid(), v.grid(), "apply_derivative");
  const VectorX<Scalar> Ku = apply_values(spec.kernel(), u.values());
  const VectorX<Scalar> Kv = apply_values(spec.kernel(), v.values());
  const auto& h = spec.decay().values();
  const auto& cs = spec.coordinate_sum();
  VectorX<Scalar> out(u.size());
  for (Index i = 0; i < u.size(); ++i) {
    out[i] = -h[i] * v[i] + spec.gain().derivative(Ku[i]) * Kv[i] +
             spec.reaction().d_state(cs[i], u[i]) * v[i];
  }
  return StateField<Scalar>(u.grid_ptr(), std::move(out));
}

template <typename Scalar = double>
struct LipschitzConstants {
  Scalar gain = 0;      // L_g
  Scalar reaction = 0;  // L_f
};

/// Sampled sup |g'| over |s| <= 1.1 radius ||J||_1 and sup |d2 f| over
/// |s| <= 1.1 radius (10^4 + 1 samples each, s = 0 included).
template <typename Scalar>
LipschitzConstants<Scalar> lipschitz_estimate(const ModelSpec<Scalar>& spec, Scalar radius) {
  if (!(radius > Scalar(0))) throw UsageError("lipschitz_estimate: radius must be positive");
  constexpr Index kSamples = 10001;
  const Index half = kSamples / 2;
  const Scalar margin = Scalar(1.1);
  const Scalar s_gain = margin * radius * std::max(spec.kernel().norm(Scalar(1)), Scalar(0));
  const Scalar s_reac = margin * radius;
  const auto sums = detail::coordinate_sum_lattice(spec.grid(), spec.grid().dimension() == 1 ? 10 : 4);

  LipschitzConstants<Scalar> L;
  for (Index k = 0; k < kSamples; ++k) {
    const Scalar t = Scalar(k - half) / Scalar(half);
    L.gain = std::max(L.gain, std::abs(spec.gain().derivative(t * s_gain)));
    for (Scalar cs : sums)
      L.reaction = std::max(L.reaction, std::abs(spec.reaction().d_state(cs, t * s_reac)));
  }
  return L;
}

/// p sum_j w_j |u_j|^(p-1) sgn(u_j) F(u)_j: the time derivative of ||u||_p^p
/// along the flow. sgn(0) = 0.
template <typename Scalar>
Scalar lyapunov_derivative(const ModelSpec<Scalar>& spec, const StateField<Scalar>& u) {
  const Scalar p = spec.space().p();
  const VectorX<Scalar> F = rhs_values(spec, u.values());
  const auto& w = spec.grid().weights();
  Scalar sum = 0;
  for (Index j = 0; j < u.size(); ++j) {
    const Scalar uj = u[j];
    if (uj == Scalar(0)) continue;
    const Scalar sgn = uj > 0 ? Scalar(1) : Scalar(-1);
    const Scalar mag = p == Scalar(1) ? Scalar(1) : std::pow(std::abs(uj), p - Scalar(1));
    sum += w[j] * mag * sgn * F[j];
  }
  return p * sum;
}

}  // namespace nonlocal
