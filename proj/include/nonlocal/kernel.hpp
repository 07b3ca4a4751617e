#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nonlocal/errors.hpp"
#include "nonlocal/grid.hpp"
#include "nonlocal/parallel.hpp"

namespace nonlocal {

enum class KernelFamily { uniform, truncated_gaussian, tent };
enum class Normalization { global, none };

/// Radial kernel J(x,y) = amplitude * profile(|x - y|) / Z.
///
/// Under global normalization Z is the integral of the profile over R^N, so
/// that J(x, .) has unit mass. A uniform kernel with infinite radius has
/// support Omega itself and is normalized by |Omega|.
template <typename Scalar = double>
struct KernelSpec {
  KernelFamily family = KernelFamily::tent;
  Scalar amplitude = Scalar(1);
  Scalar sigma = Scalar(0.1);   // truncated_gaussian only
  Scalar radius = Scalar(0.25); // support radius; +inf allowed for uniform
  Normalization normalization = Normalization::global;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

  void check() const {
    auto fail = [](const std::string& m) { throw ConfigurationError("kernel: " + m); };
    if (!(amplitude >= Scalar(0)) || !std::isfinite(static_cast<double>(amplitude)))
      fail("amplitude must be finite and nonnegative");
    if (!(radius > Scalar(0))) fail("radius must be positive");
    if (family != KernelFamily::uniform && !std::isfinite(static_cast<double>(radius)))
      fail("radius must be finite for this family");
    if (family == KernelFamily::truncated_gaussian && !(sigma > Scalar(0)))
      fail("sigma must be positive");
  }
};

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::uniform: return "uniform";
    case KernelFamily::truncated_gaussian: return "truncated_gaussian";
    case KernelFamily::tent: return "tent";
  }
  return "?";
}

/// Separable bump b(x) b(y) with b(x) = (1 - |x - c|^2 / w^2)^2 on |x - c| < w.
template <typename Scalar = double>
struct BumpSpec {
  std::vector<Scalar> center;
  Scalar width = Scalar(0.1);

  friend bool operator==(const BumpSpec&, const BumpSpec&) = default;
};

namespace detail {

template <typename Scalar>
Scalar radial_mass(const KernelSpec<Scalar>& s, int dim, Scalar domain_measure) {
  using std::numbers::pi_v;
  const Scalar R = s.radius;
  switch (s.family) {
    case KernelFamily::uniform:
      if (!std::isfinite(static_cast<double>(R))) return domain_measure;
      return dim == 1 ? Scalar(2) * R : pi_v<Scalar> * R * R;
    case KernelFamily::truncated_gaussian: {
      const Scalar sg = s.sigma;
      if (dim == 1)
        return sg * std::sqrt(Scalar(2) * pi_v<Scalar>) * std::erf(R / (sg * std::sqrt(Scalar(2))));
      return Scalar(2) * pi_v<Scalar> * sg * sg * (-std::expm1(-R * R / (Scalar(2) * sg * sg)));
    }
    case KernelFamily::tent:
      return dim == 1 ? R : pi_v<Scalar> * R * R / Scalar(3);
  }
  return Scalar(1);
}

}  // namespace detail

/// Symmetric nonnegative kernel built as a linear combination of radial
/// families and separable bumps. Every term is analytic, so values and
/// x-derivatives are exact.
template <typename Scalar = double>
class Kernel {
 public:
  Kernel(const KernelSpec<Scalar>& spec) {  // NOLINT: implicit by intent
    spec.check();
    radial_.push_back({Scalar(1), spec});
  }

  /// (1 - theta) * a + theta * b
  static Kernel mix(const Kernel& a, const Kernel& b, Scalar theta) {
    Kernel k = a;
    for (auto& t : k.radial_) t.first *= (Scalar(1) - theta);
    for (auto& t : k.bumps_) t.first *= (Scalar(1) - theta);
    for (auto t : b.radial_) k.radial_.push_back({theta * t.first, t.second});
    for (auto t : b.bumps_) k.bumps_.push_back({theta * t.first, t.second});
    return k;
  }

  /// this + amplitude * bump(x) bump(y)
  Kernel with_bump(const BumpSpec<Scalar>& bump, Scalar amplitude) const {
    if (!(bump.width > Scalar(0))) throw ConfigurationError("kernel: bump width must be positive");
    Kernel k = *this;
    k.bumps_.push_back({amplitude, bump});
    return k;
  }

  /// Copy with normalization constants resolved for `grid`'s dimension and
  /// measure. value() and derivative() require a bound kernel.
  Kernel bound_to(const Grid<Scalar>& grid) const {
    Kernel k = *this;
    k.normalizers_.clear();
    for (const auto& [coef, spec] : radial_) {
      k.normalizers_.push_back(spec.normalization == Normalization::global
                                   ? detail::radial_mass(spec, grid.dimension(), grid.measure())
                                   : Scalar(1));
    }
    return k;
  }

  template <typename X, typename Y>
  Scalar value(const X& x, const Y& y) const {
    Scalar r2 = (x - y).squaredNorm();
    Scalar r = std::sqrt(r2);
    Scalar v = 0;
    for (std::size_t t = 0; t < radial_.size(); ++t) {
      const auto& [coef, s] = radial_[t];
      Scalar prof = 0;
      if (r <= s.radius) {
        switch (s.family) {
          case KernelFamily::uniform: prof = 1; break;
          case KernelFamily::truncated_gaussian: prof = std::exp(-r2 / (Scalar(2) * s.sigma * s.sigma)); break;
          case KernelFamily::tent: prof = Scalar(1) - r / s.radius; break;
        }
      }
      v += coef * s.amplitude * prof / normalizers_[t];
    }
    for (const auto& [amp, b] : bumps_) v += amp * bump_value(b, x) * bump_value(b, y);
    return v;
  }

  /// d/dx_axis J(x, y)
  template <typename X, typename Y>
  Scalar derivative(const X& x, const Y& y, int axis) const {
    const Scalar r2 = (x - y).squaredNorm();
    const Scalar r = std::sqrt(r2);
    const Scalar dx = x[axis] - y[axis];
    Scalar v = 0;
    for (std::size_t t = 0; t < radial_.size(); ++t) {
      const auto& [coef, s] = radial_[t];
      Scalar d = 0;
      if (r < s.radius) {
        switch (s.family) {
          case KernelFamily::uniform: break;
          case KernelFamily::truncated_gaussian: {
            const Scalar s2 = s.sigma * s.sigma;
            d = -dx / s2 * std::exp(-r2 / (Scalar(2) * s2));
            break;
          }
          case KernelFamily::tent:
            if (r > Scalar(0)) d = -dx / (r * s.radius);
            break;
        }
      }
      v += coef * s.amplitude * d / normalizers_[t];
    }
    for (const auto& [amp, b] : bumps_) v += amp * bump_derivative(b, x, axis) * bump_value(b, y);
    return v;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& [coef, s] : radial_) {
      if (!first) os << " + ";
      first = false;
      os << coef << "*" << to_string(s.family) << "(A=" << s.amplitude << ",R=" << s.radius;
      if (s.family == KernelFamily::truncated_gaussian) os << ",sigma=" << s.sigma;
      os << (s.normalization == Normalization::global ? ",global)" : ",none)");
    }
    for (const auto& [amp, b] : bumps_) {
      os << " + " << amp << "*bump(w=" << b.width << ",c=";
      for (auto c : b.center) os << c << ";";
      os << ")";
    }
    return os.str();
  }

 private:
  template <typename X>
  static Scalar bump_value(const BumpSpec<Scalar>& b, const X& x) {
    Scalar q = 0;
    for (Index a = 0; a < x.size(); ++a) {
      const Scalar d = x[a] - b.center.at(a);
      q += d * d;
    }
    q /= b.width * b.width;
    return q < Scalar(1) ? (Scalar(1) - q) * (Scalar(1) - q) : Scalar(0);
  }
  template <typename X>
  static Scalar bump_derivative(const BumpSpec<Scalar>& b, const X& x, int axis) {
    Scalar q = 0;
    for (Index a = 0; a < x.size(); ++a) {
      const Scalar d = x[a] - b.center.at(a);
      q += d * d;
    }
    const Scalar w2 = b.width * b.width;
    q /= w2;
    if (q >= Scalar(1)) return 0;
    return -Scalar(4) * (Scalar(1) - q) * (x[axis] - b.center.at(axis)) / w2;
  }

  std::vector<std::pair<Scalar, KernelSpec<Scalar>>> radial_;
  std::vector<std::pair<Scalar, BumpSpec<Scalar>>> bumps_;
  std::vector<Scalar> normalizers_;
};

struct AssemblyOptions {
  bool with_derivatives = false;
  // Divide each row by its quadrature mass (Neumann-style). Breaks symmetry.
  bool renormalize_rows = false;
  std::int64_t max_entries = std::int64_t(4096) * 4096;
  int threads = 1;
};

/// Dense quadrature matrix of K_J on a grid, entry (i, j) = J(x_i, y_j).
template <typename Scalar = double>
class KernelMatrix {
 public:
  KernelMatrix(GridPtr<Scalar> grid, RowMatrixX<Scalar> entries,
               std::vector<RowMatrixX<Scalar>> derivatives, std::string id)
      : grid_(std::move(grid)),
        entries_(std::move(entries)),
        derivatives_(std::move(derivatives)),
        id_(std::move(id)),
        cache_(std::make_shared<Cache>()) {
    if (entries_.rows() != grid_->size() || entries_.cols() != grid_->size())
      throw UsageError("KernelMatrix: entries do not match the grid size");
  }

  const Grid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const RowMatrixX<Scalar>& entries() const { return entries_; }
  bool has_derivatives() const { return !derivatives_.empty(); }
  const RowMatrixX<Scalar>& derivative(int axis) const {
    if (!has_derivatives()) throw UsageError("KernelMatrix assembled without derivatives");
    return derivatives_.at(axis);
  }
  const std::string& id() const { return id_; }

  /// sup_i || J(x_i, .) ||_{L^p}, p in [1, inf]. Cached per p.
  Scalar norm(Scalar p) const { return cached(-1, p, entries_); }

  /// sup_i || d_axis J(x_i, .) ||_{L^p}
  Scalar derivative_norm(int axis, Scalar p) const { return cached(axis, p, derivative(axis)); }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<std::pair<int, double>, Scalar> values;
  };

  Scalar cached(int slot, Scalar p, const RowMatrixX<Scalar>& m) const {
    if (!(p >= Scalar(1))) throw UsageError("kernel norm exponent must be >= 1");
    const auto key = std::make_pair(slot, static_cast<double>(p));
    {
      std::lock_guard lock(cache_->mutex);
      auto it = cache_->values.find(key);
      if (it != cache_->values.end()) return it->second;
    }
    const auto& w = grid_->weights();
    Scalar best = 0;
    for (Index i = 0; i < m.rows(); ++i) {
      best = std::max(best, weighted_norm(m.row(i).transpose(), w, p));
    }
    std::lock_guard lock(cache_->mutex);
    cache_->values.emplace(key, best);
    return best;
  }

  GridPtr<Scalar> grid_;
  RowMatrixX<Scalar> entries_;
  std::vector<RowMatrixX<Scalar>> derivatives_;
  std::string id_;
  std::shared_ptr<Cache> cache_;
};

template <typename Scalar = double>
using KernelMatrixPtr = std::shared_ptr<const KernelMatrix<Scalar>>;

template <typename Scalar>
KernelMatrix<Scalar> assemble(const Kernel<Scalar>& kernel, const GridPtr<Scalar>& grid,
                              const AssemblyOptions& options = {}) {
  const Index n = grid->size();
  if (static_cast<double>(n) * static_cast<double>(n) > static_cast<double>(options.max_entries)) {
    throw ResourceError("kernel matrix with " + std::to_string(n) + "^2 entries exceeds the cap of " +
                        std::to_string(options.max_entries));
  }
  const Kernel<Scalar> bound = kernel.bound_to(*grid);
  const auto& nodes = grid->nodes();

  RowMatrixX<Scalar> entries(n, n);
  // Upper triangle evaluated once and mirrored: symmetry is exact.
  parallel_for(n, options.threads, [&](Index i) {
    for (Index j = i; j < n; ++j) entries(i, j) = bound.value(nodes.col(i), nodes.col(j));
  });
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < i; ++j) entries(i, j) = entries(j, i);

  std::vector<RowMatrixX<Scalar>> derivatives;
  if (options.with_derivatives) {
    for (int a = 0; a < grid->dimension(); ++a) {
      RowMatrixX<Scalar> d(n, n);
      parallel_for(n, options.threads, [&](Index i) {
        for (Index j = 0; j < n; ++j) d(i, j) = bound.derivative(nodes.col(i), nodes.col(j), a);
      });
      derivatives.push_back(std::move(d));
    }
  }

  if (options.renormalize_rows) {
    const VectorX<Scalar> mass = entries * grid->weights();
    for (Index i = 0; i < n; ++i) {
      if (mass[i] > Scalar(0)) {
        entries.row(i) /= mass[i];
        for (auto& d : derivatives) d.row(i) /= mass[i];
      }
    }
  }
  std::string id = kernel.describe();
  if (options.renormalize_rows) id += " [row-normalized]";
  return KernelMatrix<Scalar>(grid, std::move(entries), std::move(derivatives), std::move(id));
}

template <typename Scalar>
KernelMatrix<Scalar> assemble(const KernelSpec<Scalar>& spec, const GridPtr<Scalar>& grid,
                              const AssemblyOptions& options = {}) {
  return assemble(Kernel<Scalar>(spec), grid, options);
}

/// (K u)_i = sum_j w_j J(x_i, y_j) u_j on raw node values.
template <typename Scalar, typename Derived>
VectorX<Scalar> apply_values(const KernelMatrix<Scalar>& K, const Eigen::MatrixBase<Derived>& u) {
  return K.entries() * K.grid().weights().cwiseProduct(u);
}

template <typename Scalar>
StateField<Scalar> apply(const KernelMatrix<Scalar>& K, const StateField<Scalar>& u) {
  require_same_grid(K.grid(), u.grid(), "kernel apply");
  return StateField<Scalar>(u.grid_ptr(), apply_values(K, u.values()));
}

template <typename Scalar>
Scalar p_norm(const KernelMatrix<Scalar>& K, Scalar p) {
  return K.norm(p);
}

/// max_i sum_j w_j |A_ij - B_ij|
template <typename Scalar>
Scalar l1_distance(const KernelMatrix<Scalar>& a, const KernelMatrix<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "l1_distance");
  const auto& w = a.grid().weights();
  Scalar best = 0;
  for (Index i = 0; i < a.entries().rows(); ++i) {
    best = std::max(best, (a.entries().row(i) - b.entries().row(i)).cwiseAbs().dot(w.transpose()));
  }
  return best;
}

template <typename Scalar = double>
struct BoundCheck {
  Scalar lhs = 0;
  Scalar rhs = 0;
  Scalar slack() const { return rhs - lhs; }
  bool holds(Scalar tolerance = Scalar(1e-12)) const {
    return slack() >= -tolerance * std::max(Scalar(1), std::abs(rhs));
  }
};

/// Discrete versions of the three operator estimates for K_J:
///   pointwise:  |K u(x)|       <= ||J||_{p'} ||u||_p
///   young:      ||K u||_p      <= ||J||_1   ||u||_p
///   smoothing:  ||K u||_p      <= ||J||_p   ||u||_1
template <typename Scalar = double>
struct OperatorBoundsReport {
  Scalar p = 0;
  BoundCheck<Scalar> pointwise;
  BoundCheck<Scalar> young;
  BoundCheck<Scalar> smoothing;
  bool all_hold() const { return pointwise.holds() && young.holds() && smoothing.holds(); }
  Scalar min_slack() const {
    return std::min({pointwise.slack(), young.slack(), smoothing.slack()});
  }
};

template <typename Scalar>
OperatorBoundsReport<Scalar> verify_operator_bounds(const KernelMatrix<Scalar>& K,
                                                    const StateField<Scalar>& u, Scalar p) {
  const LpSpace<Scalar> space(p);
  const StateField<Scalar> Ku = apply(K, u);
  const Scalar u_p = lp_norm(u, space);
  const Scalar u_1 = lp_norm(u, LpSpace<Scalar>(1));
  const Scalar Ku_p = lp_norm(Ku, space);

  OperatorBoundsReport<Scalar> r;
  r.p = p;
  r.pointwise = {sup_norm(Ku), K.norm(space.conjugate()) * u_p};
  r.young = {Ku_p, K.norm(Scalar(1)) * u_p};
  r.smoothing = {Ku_p, K.norm(p) * u_1};
  return r;
}

/// Flat binary dump: two uint64 dimensions (rows, cols) then row-major doubles.
template <typename Scalar>
void write_binary(const RowMatrixX<Scalar>& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()),
                                 static_cast<std::uint64_t>(m.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = static_cast<double>(m(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

inline RowMatrixX<double> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t dims[2] = {0, 0};
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  RowMatrixX<double> m(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * dims[0] * dims[1]));
  if (!in) throw IoError("truncated kernel dump " + path);
  return m;
}

}  // namespace nonlocal
