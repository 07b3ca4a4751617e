#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "nonlocal/integrator.hpp"
#include "test_support.hpp"

using namespace nonlocal;
using namespace testing_support;

namespace {

/// h = 1, g(s) = s/2 with a unit row-sum kernel, f = 1/2: u = 1 is an equilibrium.
ModelSpec<double> fixed_point_model(const KernelMatrixPtr<double>& K) {
  DecaySpec<double> d;
  ReactionSpec<double> r;
  r.family = ReactionFamily::saturated_affine;
  r.beta = 0.5;
  r.k_f = 0.1;
  r.c_f = 0.5;
  GainSpec<double> g;
  g.family = GainFamily::linear;
  g.gamma = 0.5;
  g.k_g = g.c_g = 0.5;
  return ModelSpec<double>(d, r, g, K, LpSpace<double>(2), 1.0, 1.0);
}

StateField<double> smooth_initial(const GridPtr<double>& g) {
  return StateField<double>::from_function(g, [](const auto& x) {
    return 2 * std::sin(std::numbers::pi * x[0]) + std::cos(5 * std::numbers::pi * x[0]);
  });
}

double l2_distance(const StateField<double>& a, const StateField<double>& b) {
  return lp_norm(a - b, LpSpace<double>(2));
}

StateField<double> run_to(const ModelSpec<double>& spec, const StateField<double>& u0, Scheme s, double dt,
                          double t_end) {
  IntegratorConfig<double> cfg;
  cfg.scheme = s;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.record_every = 1000000;
  return integrate(spec, u0, cfg).final_state;
}

double fitted_order(const std::vector<double>& dts, const std::vector<double>& errs) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) mx += std::log(dts[i]), my += std::log(errs[i]);
  mx /= dts.size();
  my /= dts.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    const double dx = std::log(dts[i]) - mx;
    sxy += dx * (std::log(errs[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("phi1 series branch agrees with the closed form") {
  for (double z : {0.0, 1e-12, 1e-8, 5e-5, 9.99e-5, 1e-4, 1.01e-4, 1e-3, 0.5, 3.0, 40.0}) {
    const long double zl = z;
    const long double exact = z == 0 ? 1.0L : -std::expm1(-zl) / zl;
    CHECK(detail::phi1(z) == doctest::Approx(static_cast<double>(exact)).epsilon(1e-15));
  }
}

TEST_CASE("ETD is exact on pure decay") {
  auto g = interval(50);
  auto K = kernel_ptr(tent(0.2), g);
  std::mt19937_64 rng(4);
  for (double h1 : {0.0, 0.8, 5.0}) {
    DecaySpec<double> d{h1 > 0 ? DecayFamily::affine : DecayFamily::constant, 0.3, h1};
    ModelSpec<double> spec(d, ReactionSpec<double>{}, GainSpec<double>{}, K, LpSpace<double>(2), 1.0, 1.0);
    const auto u = random_field(g, rng);
    for (double dt : {1e-6, 1e-3, 0.1, 2.0}) {
      const auto v = step_etd(spec, u, dt);
      for (Index k = 0; k < g->size(); ++k) {
        const double expected = std::exp(-spec.decay().values()[k] * dt) * u[k];
        CHECK(std::abs(v[k] - expected) <= 1e-14 * std::abs(u[k]));
      }
    }
  }
}

TEST_CASE("equilibria are fixed points of both schemes") {
  auto g = interval(40);
  auto spec = fixed_point_model(kernel_ptr(uniform(), g));
  const auto one = StateField<double>::constant(g, 1.0);
  for (double dt : {0.01, 0.3}) {
    CHECK(sup_norm(step_etd(spec, one, dt) - one) <= 1e-14);
    CHECK(sup_norm(step_rk4(spec, one, dt) - one) <= 1e-14);
  }
}

TEST_CASE("RK4 on u' = -u") {
  auto g = interval(8);
  auto spec = pure_decay_model(kernel_ptr(tent(0.3), g));
  const auto u1 = step_rk4(spec, StateField<double>::constant(g, 1.0), 0.1);
  const double taylor = 1 - 0.1 + 0.01 / 2 - 0.001 / 6 + 0.0001 / 24;
  for (Index k = 0; k < g->size(); ++k) CHECK(u1[k] == doctest::Approx(taylor).epsilon(1e-15));
  CHECK(u1[0] == doctest::Approx(0.9048375).epsilon(1e-7));
}

TEST_CASE("step errors") {
  auto g = interval(8);
  auto spec = pure_decay_model(kernel_ptr(tent(0.3), g));
  const auto u = StateField<double>::constant(g, 1.0);
  CHECK_THROWS_AS(step_etd(spec, u, 0.0), UsageError);
  CHECK_THROWS_AS(step_rk4(spec, u, -1.0), UsageError);
  CHECK_THROWS_AS(step_etd(spec, StateField<double>::constant(interval(9), 1.0), 0.1), UsageError);

  auto big = pure_decay_model(kernel_ptr(tent(0.3), g), 2.0);
  IntegratorConfig<double> cfg;
  cfg.scheme = Scheme::rk4;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  try {
    integrate(big, StateField<double>::constant(g, 1.7e308), cfg);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("t=0.01") != std::string::npos);
  }
}

TEST_CASE("integrator configuration checks") {
  IntegratorConfig<double> cfg;
  cfg.dt = 0;
  CHECK_THROWS_WITH_AS(cfg.check(), doctest::Contains("integrator.dt"), ConfigurationError);
  cfg.dt = 2.0;
  cfg.t_end = 1.0;
  CHECK_THROWS_AS(cfg.check(), ConfigurationError);
  cfg.dt = 0.1;
  cfg.record_every = 0;
  CHECK_THROWS_AS(cfg.check(), ConfigurationError);
  cfg.record_every = 1;
  cfg.record_p = {0.5};
  CHECK_THROWS_AS(cfg.check(), ConfigurationError);
  cfg.record_p = {1.0, 2.0};
  CHECK_NOTHROW(cfg.check());
}

TEST_CASE("recording cadence, final partial step and snapshots") {
  auto g = interval(32);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  IntegratorConfig<double> cfg;
  cfg.dt = 0.03;
  cfg.t_end = 1.0;
  cfg.record_every = 5;
  cfg.snapshot_every = 10;
  cfg.record_p = {1.0, 2.0, 3.5};
  cfg.record_gradients = true;
  const auto rec = integrate(spec, smooth_initial(g), cfg);
  REQUIRE(rec.size() == 8);
  CHECK(rec.times.front() == 0.0);
  CHECK(rec.times.back() == 1.0);
  for (std::size_t i = 1; i < rec.size(); ++i) CHECK(rec.times[i] > rec.times[i - 1]);
  CHECK(rec.times[1] == doctest::Approx(0.15));
  CHECK(rec.lp_norms.size() == rec.size());
  CHECK(rec.sup_norms.size() == rec.size());
  CHECK(rec.grad_lp_norms.size() == rec.size());
  CHECK(rec.lp_norms[3].size() == 3);
  CHECK(rec.grad_lp_norms[3].size() == 3);
  REQUIRE(rec.snapshot_times.size() == 4);
  CHECK(rec.snapshot_times[3] == doctest::Approx(0.9));
  CHECK(lp_norm(rec.final_state, LpSpace<double>(3.5)) == rec.lp_norms.back()[2]);
  CHECK(rec.norm_series(1).back() == lp_norm(rec.final_state, LpSpace<double>(2)));
  CHECK(rec.gradient_series(0, 0).back() == lp_norm(discrete_gradient(rec.final_state, 0), LpSpace<double>(1)));

  // the final step is shortened to land on t_end: compare with a run at dt = 1/34
  IntegratorConfig<double> plain;
  plain.dt = 0.03;
  plain.t_end = 0.99;
  const auto head = integrate(spec, smooth_initial(g), plain).final_state;
  const auto tail = step_etd(spec, head, 0.01);
  CHECK(sup_norm(tail - rec.final_state) <= 1e-14 * sup_norm(tail));
}

TEST_CASE("t_end = 0 records only the initial state") {
  auto g = interval(16);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  IntegratorConfig<double> cfg;
  cfg.t_end = 0;
  const auto u0 = smooth_initial(g);
  const auto rec = integrate(spec, u0, cfg);
  REQUIRE(rec.size() == 1);
  CHECK(rec.times[0] == 0.0);
  CHECK(rec.lp_norms[0][0] == lp_norm(u0, LpSpace<double>(2)));
  CHECK(sup_norm(rec.final_state - u0) == 0.0);
}

TEST_CASE("observer can stop the run") {
  auto g = interval(16);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  IntegratorConfig<double> cfg;
  cfg.t_end = 1.0;
  int calls = 0;
  const auto rec = integrate(spec, smooth_initial(g), cfg, RecordObserver<double>([&](double t, const auto&) {
                               ++calls;
                               return t < 0.25;
                             }));
  CHECK(rec.times.back() == doctest::Approx(0.25));
  CHECK(calls == static_cast<int>(rec.size()));
}

TEST_CASE("pure decay norm after unit time") {
  auto g = interval(64);
  const double h0 = 1.7;
  auto spec = pure_decay_model(kernel_ptr(tent(0.25), g), h0);
  CounterRng rng(3, 0);
  const auto u0 = uniform_field(g, rng, 2.0);
  IntegratorConfig<double> cfg;
  cfg.dt = 0.01;
  cfg.t_end = 1.0;
  const auto rec = integrate(spec, u0, cfg);
  CHECK(rec.lp_norms.back()[0] == doctest::Approx(std::exp(-h0) * lp_norm(u0, LpSpace<double>(2))).epsilon(1e-12));
}

TEST_CASE("ETD converges at first order") {
  auto g = interval(64);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  const auto u0 = smooth_initial(g);
  const auto ref = run_to(spec, u0, Scheme::etd, 1e-5, 1.0);
  std::vector<double> dts{1e-2, 5e-3, 2.5e-3}, errs;
  for (double dt : dts) errs.push_back(l2_distance(run_to(spec, u0, Scheme::etd, dt, 1.0), ref));
  const double order = fitted_order(dts, errs);
  CHECK(order >= 0.9);
  CHECK(order <= 1.1);
}

TEST_CASE("RK4 converges at fourth order") {
  auto g = interval(64);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  const auto u0 = smooth_initial(g);
  const auto ref = run_to(spec, u0, Scheme::rk4, 1e-3, 1.0);
  std::vector<double> dts{0.1, 0.05, 0.025}, errs;
  for (double dt : dts) errs.push_back(l2_distance(run_to(spec, u0, Scheme::rk4, dt, 1.0), ref));
  const double order = fitted_order(dts, errs);
  CHECK(order >= 3.8);
  CHECK(order <= 4.2);
}

TEST_CASE("semigroup property") {
  auto g = interval(48);
  auto spec = nonlinear_model(kernel_ptr(gaussian(0.1, 0.3), g));
  const auto u0 = smooth_initial(g);
  for (Scheme s : {Scheme::etd, Scheme::rk4}) {
    const double dt = 0.02;
    const auto whole = run_to(spec, u0, s, dt, 2.0);
    const auto halves = run_to(spec, run_to(spec, u0, s, dt, 1.0), s, dt, 1.0);
    CHECK(l2_distance(whole, halves) <= dt);
  }
}

TEST_CASE("norm decays geometrically outside the absorbing ball") {
  auto g = interval(64);
  auto K = kernel_ptr(tent(0.25), g);
  for (double p : {1.0, 2.0, 3.0}) {
    auto spec = nonlinear_model(K, p);
    const auto c = validate(spec);
    const double dt = 0.01 / spec.decay().h0();
    const double factor = std::exp(-c.norm_decay_rate * dt);
    for (std::uint64_t stream = 0; stream < 4; ++stream) {
      CounterRng rng(11, stream);
      const auto u0 = random_field_with_norm(g, rng, 10 * c.r_delta, spec.space());
      IntegratorConfig<double> cfg;
      cfg.dt = dt;
      cfg.t_end = 6.0;
      double prev = -1;
      int violations = 0, checked = 0;
      integrate(spec, u0, cfg, RecordObserver<double>([&](double, const StateField<double>& u) {
                  const double n = lp_norm(u, spec.space());
                  if (prev >= c.r_delta) {
                    ++checked;
                    if (n > prev * factor + 10 * dt * dt) ++violations;
                  }
                  prev = n;
                  return true;
                }));
      CHECK(checked > 100);
      CHECK(violations == 0);
    }
  }
}

TEST_CASE("ensemble evolution") {
  auto g = interval(64);
  auto spec = nonlinear_model(kernel_ptr(tent(0.25), g));
  const auto c = validate(spec);
  IntegratorConfig<double> cfg;
  cfg.dt = 0.01;

  SUBCASE("zero radius gives the zero field's trajectory") {
    cfg.t_end = 0.5;
    const auto ens = integrate_ensemble(spec, 5, 1, 0.0, cfg);
    REQUIRE(ens.size() == 1);
    const auto direct = integrate(spec, StateField<double>::zeros(g), cfg);
    CHECK(ens[0].lp_norms == direct.lp_norms);
  }

  SUBCASE("same seed gives bit-identical records at any thread count") {
    cfg.t_end = 0.5;
    const auto a = integrate_ensemble(spec, 77, 6, 3.0, cfg, 1);
    const auto b = integrate_ensemble(spec, 77, 6, 3.0, cfg, 1);
    const auto t = integrate_ensemble(spec, 77, 6, 3.0, cfg, 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(trajectory_csv(a[i]) == trajectory_csv(b[i]));
      CHECK(trajectory_csv(a[i]) == trajectory_csv(t[i]));
      CHECK(a[i].lp_norms.front()[0] <= 3.0);
    }
    CHECK(trajectory_csv(a[0]) != trajectory_csv(a[1]));
  }

  SUBCASE("every member ends inside the absorbing ball") {
    const double radius = 5 * c.r_delta;
    const double bound = std::log(radius / c.r_delta) / c.norm_decay_rate;
    cfg.t_end = 2 * bound;
    cfg.record_every = 100000;
    const auto ens = integrate_ensemble(spec, 2024, 32, radius, cfg, 4);
    for (const auto& r : ens) CHECK(r.lp_norms.back()[0] <= c.r_delta);
  }

  CHECK_THROWS_AS(integrate_ensemble(spec, 1, 0, 1.0, cfg), UsageError);
}

TEST_CASE("trajectory CSV layout") {
  auto g = build_grid<double>(2, {{0.0, 1.0}, {0.0, 1.0}}, 6);
  auto spec = nonlinear_model(kernel_ptr(tent(0.4), g));
  IntegratorConfig<double> cfg;
  cfg.dt = 0.1;
  cfg.t_end = 0.3;
  cfg.record_p = {1.0, 2.5};
  cfg.record_gradients = true;
  CounterRng rng(1, 0);
  const auto csv = trajectory_csv(integrate(spec, uniform_field(g, rng, 1.0), cfg));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,norm_p1,norm_p2.5,grad_norm_p1_axis0,grad_norm_p1_axis1,grad_norm_p2.5_axis0,"
                "grad_norm_p2.5_axis1,sup_norm");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }
  CHECK(rows == 4);
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
}
