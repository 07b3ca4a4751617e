#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "nonlocal/kernel.hpp"
#include "test_support.hpp"

using namespace nonlocal;
using namespace testing_support;

namespace {

// Composite Simpson rule on [a, b] with m (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int m = 20000) {
  if (b <= a) return 0.0;
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

double tent_profile(double r, double R) { return r < R ? (1 - r / R) / R : 0.0; }

}  // namespace

TEST_CASE("uniform kernel over the whole domain") {
  auto g = interval(32);
  auto K = assemble(Kernel<double>(uniform()), g);
  CHECK((K.entries().array() == 1.0).all());
  const VectorX<double> rows = K.entries() * g->weights();
  for (Index i = 0; i < rows.size(); ++i) CHECK(rows[i] == doctest::Approx(1.0).epsilon(1e-14));
  for (double p : {1.0, 2.0, 3.5, std::numeric_limits<double>::infinity()})
    CHECK(p_norm(K, p) == doctest::Approx(1.0).epsilon(1e-14));

  auto c = StateField<double>::constant(g, 2.5);
  auto Kc = apply(K, c);
  for (Index i = 0; i < g->size(); ++i) CHECK(Kc[i] == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("tent kernel has compact support") {
  auto g = interval(64);
  auto K = assemble(Kernel<double>(tent(0.25)), g);
  for (Index i = 0; i < g->size(); ++i)
    for (Index j = 0; j < g->size(); ++j) {
      const double r = std::abs(g->node(i)[0] - g->node(j)[0]);
      if (r >= 0.25) CHECK(K.entries()(i, j) == 0.0);
      else CHECK(K.entries()(i, j) == doctest::Approx(tent_profile(r, 0.25)).epsilon(1e-13));
    }
}

TEST_CASE("truncated gaussian row sums against high resolution quadrature") {
  const double sigma = 0.1, R = 0.4;
  auto g = interval(256);
  auto K = assemble(Kernel<double>(gaussian(sigma, R)), g);
  const VectorX<double> rows = K.entries() * g->weights();
  const double Z = sigma * std::sqrt(2 * std::numbers::pi) * std::erf(R / (sigma * std::sqrt(2.0)));
  auto oracle = [&](double x) {
    auto f = [&](double y) { return std::exp(-(x - y) * (x - y) / (2 * sigma * sigma)) / Z; };
    return simpson(f, std::max(0.0, x - R), std::min(1.0, x + R));
  };
  const Index mid = 128;  // x = 0.501953125
  CHECK(rows[mid] == doctest::Approx(oracle(g->node(mid)[0])).epsilon(1e-4));
  CHECK(rows[mid] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(rows[0] == doctest::Approx(oracle(g->node(0)[0])).epsilon(1e-3));
  CHECK(rows[0] < 0.6);
  CHECK(p_norm(K, 1.0) <= 1.0 + 1e-5);  // truncation jump costs O(h J(R))
  CHECK(p_norm(K, 2.0) > p_norm(K, 1.0));
}

TEST_CASE("normalization integrates to one in 2D") {
  auto g = build_grid<double>(2, {{0.0, 2.0}, {0.0, 2.0}}, 60);
  const Index center = 30 + 60 * 30;
  for (auto spec : {tent(0.5), gaussian(0.15, 0.6), uniform(1.0, 0.5)}) {
    auto K = assemble(Kernel<double>(spec), g);
    const double mass = K.entries().row(center).dot(g->weights().transpose());
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(p_norm(K, 1.0) <= 1.0 + 5e-3);
  }
}

TEST_CASE("apply against a 16x finer quadrature") {
  const double R = 0.25;
  auto g = interval(512);
  auto K = assemble(Kernel<double>(tent(R)), g);
  auto u = StateField<double>::from_function(g, [](const auto& x) { return x[0]; });
  auto Ku = apply(K, u);
  const int fine = 512 * 16;
  double worst = 0;
  for (Index i = 0; i < g->size(); i += 7) {
    const double x = g->node(i)[0];
    double s = 0;
    for (int j = 0; j < fine; ++j) {
      const double y = (j + 0.5) / fine;
      s += tent_profile(std::abs(x - y), R) * y / fine;
    }
    worst = std::max(worst, std::abs(Ku[i] - s));
  }
  CHECK(worst <= 1e-3);

  auto zero = apply(K, StateField<double>::zeros(g));
  CHECK(sup_norm(zero) == 0.0);
  CHECK_THROWS_AS(apply(K, StateField<double>::zeros(interval(8))), UsageError);
}

TEST_CASE("apply is linear") {
  std::mt19937_64 rng(11);
  auto g = interval(64);
  auto K = assemble(random_kernel(rng), g);
  for (int t = 0; t < 20; ++t) {
    auto u = random_field(g, rng), v = random_field(g, rng);
    const double a = 1.7, b = -0.3;
    auto lhs = apply(K, a * u + b * v);
    auto rhs = a * apply(K, u) + b * apply(K, v);
    const double scale = std::max(1.0, sup_norm(lhs));
    CHECK(sup_norm(lhs - rhs) <= 1e-12 * scale);
  }
}

TEST_CASE("l1 distance") {
  auto g = interval(512);
  auto U1 = assemble(Kernel<double>(uniform()), g);
  auto U2 = assemble(Kernel<double>(uniform(1.1)), g);
  CHECK(l1_distance(U1, U1) == 0.0);
  CHECK(l1_distance(U1, U2) == doctest::Approx(0.1).epsilon(1e-12));

  auto A = assemble(Kernel<double>(tent(0.25)), g);
  auto B = assemble(Kernel<double>(tent(0.26)), g);
  double oracle = 0;
  for (Index i = 0; i < g->size(); ++i) {
    const double x = g->node(i)[0];
    auto f = [&](double y) { return std::abs(tent_profile(std::abs(x - y), 0.25) - tent_profile(std::abs(x - y), 0.26)); };
    // split at the kinks so Simpson sees smooth pieces
    double s = 0;
    double pts[] = {0.0, x - 0.26, x - 0.25, x, x + 0.25, x + 0.26, 1.0};
    for (int k = 0; k + 1 < 7; ++k) {
      const double a = std::clamp(pts[k], 0.0, 1.0), b = std::clamp(pts[k + 1], 0.0, 1.0);
      s += simpson(f, a, b, 200);
    }
    oracle = std::max(oracle, s);
  }
  CHECK(l1_distance(A, B) == doctest::Approx(oracle).epsilon(1e-3));
  CHECK(l1_distance(A, B) == doctest::Approx(l1_distance(B, A)).epsilon(1e-15));
}

TEST_CASE("l1 distance is a pseudometric on random triples") {
  std::mt19937_64 rng(5);
  auto g = interval(48);
  for (int t = 0; t < 30; ++t) {
    auto A = assemble(random_kernel(rng), g);
    auto B = assemble(random_kernel(rng), g);
    auto C = assemble(random_kernel(rng), g);
    CHECK(l1_distance(A, C) <= l1_distance(A, B) + l1_distance(B, C) + 1e-12);
    CHECK(l1_distance(A, B) == l1_distance(B, A));
  }
}

TEST_CASE("symmetry, nonnegativity and unit mass bound") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 30; ++t) {
    auto g = t % 3 == 0 ? build_grid<double>(2, {{0.0, 1.0}, {0.0, 1.0}}, 12) : interval(40 + t);
    auto k = random_kernel(rng);
    auto K = assemble(k, g);
    CHECK(K.entries() == K.entries().transpose());
    CHECK((K.entries().array() >= 0).all());
  }
  // midpoint sums may overshoot the unit mass by O(h / R)
  const double h = 1.0 / 200;
  for (auto spec : {tent(0.3), gaussian(0.1, 0.4), uniform(1.0, 0.2), uniform()}) {
    auto K = assemble(Kernel<double>(spec), interval(200));
    const double tol = std::isinf(spec.radius) ? 1e-12 : h / spec.radius;
    CHECK(p_norm(K, 1.0) <= 1.0 + tol);
  }
}

TEST_CASE("operator bounds examples") {
  auto g = interval(64);
  auto U = assemble(Kernel<double>(uniform()), g);
  auto r = verify_operator_bounds(U, StateField<double>::constant(g, 1.0), 2.0);
  CHECK(r.all_hold());
  CHECK(r.young.lhs == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.young.rhs == doctest::Approx(1.0).epsilon(1e-14));

  auto z = verify_operator_bounds(U, StateField<double>::zeros(g), 4.0);
  CHECK(z.all_hold());
  CHECK(z.pointwise.lhs == 0.0);
  CHECK(z.young.lhs == 0.0);
  CHECK(z.smoothing.lhs == 0.0);
}

TEST_CASE("operator bounds on 200 random draws per exponent") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(8, 96);
  for (double p : {1.0, 2.0, 4.0}) {
    double worst = std::numeric_limits<double>::infinity();
    int failures = 0;
    for (int t = 0; t < 200; ++t) {
      auto g = t % 5 == 0 ? build_grid<double>(2, {{0.0, 1.0}, {-0.5, 0.5}}, size(rng) / 6 + 2)
                          : build_grid<double>(1, {{0.0, 0.5 + (t % 4)}}, size(rng));
      auto K = assemble(random_kernel(rng), g);
      auto u = random_field(g, rng);
      auto r = verify_operator_bounds(K, u, p);
      if (!r.all_hold()) ++failures;
      const double scale = std::max({1.0, r.pointwise.rhs, r.young.rhs, r.smoothing.rhs});
      worst = std::min(worst, r.min_slack() / scale);
    }
    CHECK(failures == 0);
    CHECK(worst >= -1e-12);
  }
}

TEST_CASE("derivative matrices match finite differences of the kernel") {
  auto g = build_grid<double>(2, {{0.0, 1.0}, {0.0, 1.0}}, 9);
  for (auto spec : {tent(0.4), gaussian(0.2, 0.7)}) {
    Kernel<double> k = Kernel<double>(spec).bound_to(*g);
    auto K = assemble(Kernel<double>(spec), g, AssemblyOptions{.with_derivatives = true});
    REQUIRE(K.has_derivatives());
    const double eps = 1e-6;
    for (Index i = 0; i < g->size(); i += 5)
      for (Index j = 0; j < g->size(); j += 3) {
        const Eigen::Vector2d x = g->node(i), y = g->node(j);
        const double r = (x - y).norm();
        if (r < 1e-3 || std::abs(r - spec.radius) < 1e-3) continue;
        for (int a = 0; a < 2; ++a) {
          Eigen::Vector2d xp = x, xm = x;
          xp[a] += eps;
          xm[a] -= eps;
          const double fd = (k.value(xp, y) - k.value(xm, y)) / (2 * eps);
          CHECK(K.derivative(a)(i, j) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        }
      }
    CHECK(K.derivative_norm(0, 2.0) > 0);
  }
}

TEST_CASE("mixtures and bumps") {
  auto g = interval(100);
  auto A = assemble(Kernel<double>(tent(0.2)), g);
  auto B = assemble(Kernel<double>(tent(0.4)), g);
  auto M = assemble(Kernel<double>::mix(Kernel<double>(tent(0.2)), Kernel<double>(tent(0.4)), 0.25), g);
  const RowMatrixX<double> expected = 0.75 * A.entries() + 0.25 * B.entries();
  CHECK((M.entries() - expected).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(l1_distance(M, A) == doctest::Approx(0.25 * l1_distance(B, A)).epsilon(1e-12));

  BumpSpec<double> bump{{0.5}, 0.2};
  auto Kb = assemble(Kernel<double>(tent(0.2)).with_bump(bump, 0.3), g);
  CHECK(Kb.entries() == Kb.entries().transpose());
  const double diff = l1_distance(Kb, A);
  CHECK(diff > 0);
  auto Kb2 = assemble(Kernel<double>(tent(0.2)).with_bump(bump, 0.15), g);
  CHECK(l1_distance(Kb2, A) == doctest::Approx(diff / 2).epsilon(1e-12));
}

TEST_CASE("assembly is thread-count independent and capped") {
  auto g = build_grid<double>(2, {{0.0, 1.0}, {0.0, 1.0}}, 14);
  auto one = assemble(Kernel<double>(gaussian(0.2, 0.5)), g, AssemblyOptions{.with_derivatives = true, .threads = 1});
  auto four = assemble(Kernel<double>(gaussian(0.2, 0.5)), g, AssemblyOptions{.with_derivatives = true, .threads = 4});
  CHECK(one.entries() == four.entries());
  CHECK(one.derivative(1) == four.derivative(1));
  CHECK_THROWS_AS(assemble(Kernel<double>(tent(0.2)), interval(100), AssemblyOptions{.max_entries = 9999}), ResourceError);
}

TEST_CASE("row renormalization gives unit row mass") {
  auto g = interval(80);
  auto K = assemble(Kernel<double>(tent(0.3)), g, AssemblyOptions{.renormalize_rows = true});
  const VectorX<double> rows = K.entries() * g->weights();
  for (Index i = 0; i < rows.size(); ++i) CHECK(rows[i] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("binary dump round trip") {
  auto g = interval(17);
  auto K = assemble(Kernel<double>(gaussian(0.1, 0.3)), g);
  const auto path = (std::filesystem::temp_directory_path() / "nonlocal_kernel_dump.bin").string();
  write_binary(K.entries(), path);
  CHECK(std::filesystem::file_size(path) == 16 + 17 * 17 * 8);
  const auto back = read_binary(path);
  CHECK(back == K.entries());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_binary(path), IoError);
}

TEST_CASE("invalid kernel parameters") {
  KernelSpec<double> s = tent(-1.0);
  CHECK_THROWS_AS(Kernel<double>{s}, ConfigurationError);
  s = gaussian(0.0, 0.3);
  CHECK_THROWS_AS(Kernel<double>{s}, ConfigurationError);
  s = tent(std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(Kernel<double>{s}, ConfigurationError);
}
