#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nonlocal/errors.hpp"

namespace nonlocal {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
// Kernel matrices are stored row-major: rows are the x argument.
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename Scalar = double>
struct Interval {
  Scalar lower;
  Scalar upper;
  Scalar length() const { return upper - lower; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Composite midpoint-rule discretization of an axis-aligned box in one or two
/// dimensions. Node ordering is lexicographic with axis 0 running fastest.
template <typename Scalar = double>
class Grid {
 public:
  static constexpr int kMaxDimension = 2;

  Grid(std::vector<Interval<Scalar>> bounds, Index nodes_per_axis)
      : bounds_(std::move(bounds)), nodes_per_axis_(nodes_per_axis) {
    const int dim = static_cast<int>(bounds_.size());
    if (dim < 1 || dim > kMaxDimension) {
      throw ConfigurationError("grid.dimension must be 1 or 2, got " + std::to_string(dim));
    }
    if (nodes_per_axis_ < 2) {
      throw ConfigurationError("grid.nodes_per_axis must be >= 2");
    }
    measure_ = Scalar(1);
    for (int a = 0; a < dim; ++a) {
      const auto& iv = bounds_[a];
      if (!std::isfinite(static_cast<double>(iv.lower)) ||
          !std::isfinite(static_cast<double>(iv.upper)) || !(iv.lower < iv.upper)) {
        std::ostringstream os;
        os << "grid.bounds: degenerate interval on axis " << a << " [" << iv.lower << ", "
           << iv.upper << "]";
        throw ConfigurationError(os.str());
      }
      measure_ *= iv.length();
    }

    Index count = 1;
    for (int a = 0; a < dim; ++a) count *= nodes_per_axis_;
    nodes_.resize(dim, count);
    for (Index k = 0; k < count; ++k) {
      Index rest = k;
      for (int a = 0; a < dim; ++a) {
        const Index i = rest % nodes_per_axis_;
        rest /= nodes_per_axis_;
        nodes_(a, k) = bounds_[a].lower + (Scalar(i) + Scalar(0.5)) * spacing(a);
      }
    }
    weights_ = VectorX<Scalar>::Constant(count, measure_ / Scalar(count));
  }

  int dimension() const { return static_cast<int>(bounds_.size()); }
  const std::vector<Interval<Scalar>>& bounds() const { return bounds_; }
  Index nodes_per_axis() const { return nodes_per_axis_; }
  Index size() const { return weights_.size(); }
  Scalar measure() const { return measure_; }
  Scalar spacing(int axis) const { return bounds_[axis].length() / Scalar(nodes_per_axis_); }

  /// dimension x size, one column per node.
  const MatrixX<Scalar>& nodes() const { return nodes_; }
  auto node(Index k) const { return nodes_.col(k); }
  const VectorX<Scalar>& weights() const { return weights_; }

  /// Flat index -> per-axis index along `axis`.
  Index axis_index(Index flat, int axis) const {
    for (int a = 0; a < axis; ++a) flat /= nodes_per_axis_;
    return flat % nodes_per_axis_;
  }
  Index stride(int axis) const {
    Index s = 1;
    for (int a = 0; a < axis; ++a) s *= nodes_per_axis_;
    return s;
  }

  bool same_as(const Grid& other) const {
    if (this == &other) return true;
    if (dimension() != other.dimension() || nodes_per_axis_ != other.nodes_per_axis_) return false;
    for (int a = 0; a < dimension(); ++a) {
      if (bounds_[a].lower != other.bounds_[a].lower || bounds_[a].upper != other.bounds_[a].upper)
        return false;
    }
    return true;
  }

 private:
  std::vector<Interval<Scalar>> bounds_;
  Index nodes_per_axis_;
  Scalar measure_{};
  MatrixX<Scalar> nodes_;
  VectorX<Scalar> weights_;
};

template <typename Scalar = double>
using GridPtr = std::shared_ptr<const Grid<Scalar>>;

template <typename Scalar = double>
GridPtr<Scalar> build_grid(int dimension, const std::vector<Interval<Scalar>>& bounds,
                           Index nodes_per_axis) {
  if (static_cast<int>(bounds.size()) != dimension) {
    throw ConfigurationError("grid.bounds: expected " + std::to_string(dimension) +
                             " intervals, got " + std::to_string(bounds.size()));
  }
  return std::make_shared<const Grid<Scalar>>(bounds, nodes_per_axis);
}

/// Exponent of an L^p phase space, 1 <= p < inf. The conjugate exponent is
/// +inf for p = 1.
template <typename Scalar = double>
class LpSpace {
 public:
  explicit LpSpace(Scalar p = Scalar(2)) : p_(p) {
    if (!(p >= Scalar(1)) || !std::isfinite(static_cast<double>(p))) {
      std::ostringstream os;
      os << "L^p exponent must lie in [1, inf), got " << p;
      throw ConfigurationError(os.str());
    }
  }
  Scalar p() const { return p_; }
  Scalar conjugate() const {
    return p_ == Scalar(1) ? std::numeric_limits<Scalar>::infinity() : p_ / (p_ - Scalar(1));
  }
  friend bool operator==(const LpSpace& a, const LpSpace& b) { return a.p_ == b.p_; }

 private:
  Scalar p_;
};

/// Scalar field sampled at the nodes of a grid.
template <typename Scalar = double>
class StateField {
 public:
  StateField() = default;
  StateField(GridPtr<Scalar> grid, VectorX<Scalar> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw UsageError("StateField requires a grid");
    if (values_.size() != grid_->size()) {
      throw UsageError("StateField: " + std::to_string(values_.size()) + " values for " +
                       std::to_string(grid_->size()) + " nodes");
    }
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(values_[i]))) {
        throw NumericalError("StateField: non-finite value at node " + std::to_string(i));
      }
    }
  }

  static StateField constant(GridPtr<Scalar> grid, Scalar c) {
    const Index n = grid->size();
    return StateField(std::move(grid), VectorX<Scalar>::Constant(n, c));
  }
  static StateField zeros(GridPtr<Scalar> grid) { return constant(std::move(grid), Scalar(0)); }

  /// Samples `fn(node_column)` at every node.
  template <typename Fn>
  static StateField from_function(GridPtr<Scalar> grid, Fn&& fn) {
    VectorX<Scalar> v(grid->size());
    for (Index k = 0; k < grid->size(); ++k) v[k] = fn(grid->node(k));
    return StateField(std::move(grid), std::move(v));
  }

  const Grid<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  const VectorX<Scalar>& values() const { return values_; }
  Index size() const { return values_.size(); }
  Scalar operator[](Index i) const { return values_[i]; }

 private:
  GridPtr<Scalar> grid_;
  VectorX<Scalar> values_;
};

template <typename Scalar>
void require_same_grid(const Grid<Scalar>& a, const Grid<Scalar>& b, const char* where) {
  if (!a.same_as(b)) throw UsageError(std::string(where) + ": grid mismatch");
}

template <typename Scalar>
StateField<Scalar> operator+(const StateField<Scalar>& a, const StateField<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "StateField +");
  return StateField<Scalar>(a.grid_ptr(), a.values() + b.values());
}

template <typename Scalar>
StateField<Scalar> operator-(const StateField<Scalar>& a, const StateField<Scalar>& b) {
  require_same_grid(a.grid(), b.grid(), "StateField -");
  return StateField<Scalar>(a.grid_ptr(), a.values() - b.values());
}

template <typename Scalar>
StateField<Scalar> operator*(Scalar alpha, const StateField<Scalar>& a) {
  return StateField<Scalar>(a.grid_ptr(), alpha * a.values());
}

/// (sum_j w_j |v_j|^p)^(1/p); p = +inf gives max_j |v_j|.
template <typename DerivedV, typename DerivedW>
typename DerivedV::Scalar weighted_norm(const Eigen::MatrixBase<DerivedV>& v,
                                        const Eigen::MatrixBase<DerivedW>& w,
                                        typename DerivedV::Scalar p) {
  using Scalar = typename DerivedV::Scalar;
  if (v.size() == 0) return Scalar(0);
  if (std::isinf(static_cast<double>(p))) return v.cwiseAbs().maxCoeff();
  if (p == Scalar(1)) return w.cwiseProduct(v.cwiseAbs()).sum();
  if (p == Scalar(2)) return std::sqrt(w.cwiseProduct(v.cwiseAbs2()).sum());
  const Scalar s = (w.array() * v.array().abs().pow(p)).sum();
  return std::pow(s, Scalar(1) / p);
}

template <typename Scalar>
Scalar lp_norm(const StateField<Scalar>& u, const LpSpace<Scalar>& space) {
  return weighted_norm(u.values(), u.grid().weights(), space.p());
}

/// Diagnostic sup-norm over the nodes.
template <typename Scalar>
Scalar sup_norm(const StateField<Scalar>& u) {
  return u.size() == 0 ? Scalar(0) : u.values().cwiseAbs().maxCoeff();
}

/// Forward differences along `axis`; the last node on each line copies the
/// backward difference of its neighbour.
template <typename Scalar>
StateField<Scalar> discrete_gradient(const StateField<Scalar>& u, int axis) {
  const auto& grid = u.grid();
  if (axis < 0 || axis >= grid.dimension()) {
    throw UsageError("discrete_gradient: axis " + std::to_string(axis) + " out of range");
  }
  const Index n = grid.nodes_per_axis();
  const Index stride = grid.stride(axis);
  const Scalar inv_h = Scalar(1) / grid.spacing(axis);
  const auto& v = u.values();
  VectorX<Scalar> d(v.size());
  for (Index k = 0; k < v.size(); ++k) {
    const Index i = grid.axis_index(k, axis);
    if (i + 1 < n) {
      d[k] = (v[k + stride] - v[k]) * inv_h;
    } else {
      d[k] = (v[k] - v[k - stride]) * inv_h;
    }
  }
  return StateField<Scalar>(u.grid_ptr(), std::move(d));
}

template <typename Scalar>
Scalar gradient_lp_norm(const StateField<Scalar>& u, int axis, const LpSpace<Scalar>& space) {
  return lp_norm(discrete_gradient(u, axis), space);
}

/// (||u||_p^p + sum_i ||d_i u||_p^p)^(1/p)
template <typename Scalar>
Scalar w1p_norm(const StateField<Scalar>& u, const LpSpace<Scalar>& space) {
  const Scalar p = space.p();
  Scalar s = std::pow(lp_norm(u, space), p);
  for (int a = 0; a < u.grid().dimension(); ++a) s += std::pow(gradient_lp_norm(u, a, space), p);
  return std::pow(s, Scalar(1) / p);
}

}  // namespace nonlocal
