#include <doctest.h>

#include <cmath>
#include <random>

#include "scatterlm/error.hpp"
#include "scatterlm/lm_solver.hpp"
#include "test_support.hpp"

using namespace scatterlm;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ResidualFn rosenbrock = [](const Eigen::VectorXd& p) { return vec({1.0 - p[0], 10.0 * (p[1] - p[0] * p[0])}); };

// Plain gradient descent with backtracking from several starts; slow but
// shares nothing with the LM code.
Eigen::VectorXd descent_oracle(const ResidualFn& f, const std::vector<Eigen::VectorXd>& starts) {
  Eigen::VectorXd best;
  double best_cost = INFINITY;
  for (auto p : starts) {
    auto cost = [&](const Eigen::VectorXd& q) { return f(q).squaredNorm(); };
    for (int it = 0; it < 200000; ++it) {
      Eigen::VectorXd g(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        Eigen::VectorXd a = p, b = p;
        a[i] += 1e-7;
        b[i] -= 1e-7;
        g[i] = (cost(a) - cost(b)) / 2e-7;
      }
      double step = 1e-2;
      const double c0 = cost(p);
      while (step > 1e-14 && cost(p - step * g) >= c0) step *= 0.5;
      if (step <= 1e-14) break;
      p -= step * g;
    }
    if (cost(p) < best_cost) best_cost = cost(p), best = p;
  }
  return best;
}

}  // namespace

TEST_SUITE("lm") {

TEST_CASE("config validation") {
  LmConfig c;
  CHECK_NOTHROW(c.validate());
  c.damping_up = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.damping_down = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.cost_tolerance = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("finite-difference Jacobian of simple functions") {
  const Bounds b{{-10}, {10}};
  const ResidualFn identity = [](const Eigen::VectorXd& p) { return p; };
  auto J = finite_diff_jacobian(identity, vec({2.0}), vec({2.0}), 1e-4, b);
  CHECK(std::abs(J(0, 0) - 1.0) < 1e-6);
  const ResidualFn square = [](const Eigen::VectorXd& p) { return vec({p[0] * p[0]}); };
  J = finite_diff_jacobian(square, vec({3.0}), vec({9.0}), 1e-4, b);
  // forward step h = 1e-3 gives 6 + h
  CHECK(std::abs(J(0, 0) - 6.0) < 2e-3);
}

TEST_CASE("Jacobian steps away from an active upper bound") {
  const Bounds b{{0}, {1}};
  int calls_outside = 0;
  const ResidualFn f = [&](const Eigen::VectorXd& p) {
    if (p[0] > 1.0) ++calls_outside;
    return vec({std::exp(p[0])});
  };
  const auto J = finite_diff_jacobian(f, vec({1.0}), vec({std::exp(1.0)}), 1e-4, b);
  CHECK(calls_outside == 0);
  CHECK(J(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-3));
}

TEST_CASE("non-finite residuals are reported") {
  const Bounds b{{-1}, {1}};
  const ResidualFn f = [](const Eigen::VectorXd& p) { return vec({p[0] > 0.5 ? NAN : p[0]}); };
  CHECK_THROWS_AS(finite_diff_jacobian(f, vec({0.5}), vec({0.5}), 1e-2, b), Error);
}

TEST_CASE("quadratic surrogate converges in a few iterations") {
  const ResidualFn f = [](const Eigen::VectorXd& p) { return vec({p[0] - 3.0}); };
  const auto out = lm_minimize(f, vec({0.0}), Bounds{{-10}, {10}}, LmConfig{});
  CHECK(out.converged);
  CHECK(out.iterations <= 5);
  // stops once the cost drops below cost_tolerance
  CHECK(std::abs(out.params[0] - 3.0) <= std::sqrt(LmConfig{}.cost_tolerance));
}

TEST_CASE("superlinear cost decrease on the quadratic") {
  const ResidualFn f = [](const Eigen::VectorXd& p) { return vec({p[0] - 3.0, 0.5 * (p[1] + 1.0)}); };
  LmConfig c;
  c.cost_tolerance = 1e-30;
  c.step_tolerance = 1e-15;
  const auto out = lm_minimize(f, vec({0.0, 4.0}), Bounds{{-10, -10}, {10, 10}}, c);
  REQUIRE(out.trace.size() >= 3);
  const double r1 = out.trace[1].cost / out.trace[0].cost;
  const double r2 = out.trace[2].cost / out.trace[1].cost;
  CHECK(r2 < r1);
  CHECK(r2 < 1e-4);
}

TEST_CASE("Rosenbrock reaches (1, 1)") {
  LmConfig c;
  c.cost_tolerance = 1e-20;
  c.step_tolerance = 1e-14;
  c.fd_step = 1e-7;
  const auto out = lm_minimize(rosenbrock, vec({-1.2, 1.0}), Bounds{{-5, -5}, {5, 5}}, c);
  CHECK(out.converged);
  CHECK(std::abs(out.params[0] - 1.0) < 1e-6);
  CHECK(std::abs(out.params[1] - 1.0) < 1e-6);
  const auto oracle = descent_oracle(rosenbrock, {vec({-1.2, 1.0}), vec({2.0, 2.0}), vec({0.0, -1.0})});
  CHECK((oracle - out.params).norm() < 1e-3);
}

TEST_CASE("monotone accepted cost and feasibility over random fits") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int fit = 0; fit < 100; ++fit) {
    const double a = u(rng), b = u(rng), c0 = u(rng);
    // a smooth nonlinear model y = a exp(b t) + c sampled at 8 points
    const ResidualFn f = [=](const Eigen::VectorXd& p) {
      Eigen::VectorXd r(8);
      for (int i = 0; i < 8; ++i) {
        const double t = 0.2 * i;
        r[i] = p[0] * std::exp(p[1] * t) + p[2] - (a * std::exp(b * t) + c0);
      }
      return r;
    };
    const Bounds box{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
    const auto out = lm_minimize(f, vec({u(rng) * 0.7, u(rng) * 0.7, u(rng) * 0.7}), box, LmConfig{});
    for (std::size_t k = 0; k < out.trace.size(); ++k) {
      const auto& p = out.trace[k].params;
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] >= box.low[i]);
        CHECK(p[i] <= box.high[i]);
      }
      if (k > 0) CHECK(out.trace[k].cost <= out.trace[k - 1].cost);
    }
    CHECK(box.contains(out.params));
  }
}

TEST_CASE("deterministic results") {
  const auto a = lm_minimize(rosenbrock, vec({-1.2, 1.0}), Bounds{{-5, -5}, {5, 5}}, LmConfig{});
  const auto b = lm_minimize(rosenbrock, vec({-1.2, 1.0}), Bounds{{-5, -5}, {5, 5}}, LmConfig{});
  CHECK(a.params == b.params);
  CHECK(a.iterations == b.iterations);
  CHECK(a.trace.size() == b.trace.size());
}

TEST_CASE("initial point must be feasible") {
  CHECK_THROWS_AS(lm_minimize(rosenbrock, vec({-6, 1}), Bounds{{-5, -5}, {5, 5}}, LmConfig{}), Error);
  CHECK_THROWS_AS(lm_minimize(rosenbrock, vec({0}), Bounds{{-5, -5}, {5, 5}}, LmConfig{}), Error);
}

}

TEST_SUITE("lm") {

TEST_CASE("forward-model residuals") {
  const auto model = test_support::si_grating_model();
  IncidenceConfig inc;
  inc.wavelengths = IncidenceConfig::grid(200, 800, 100);
  inc.truncation_order = 5;
  inc.staircase_slices = 6;
  const ParamMap truth{{"TCD", 350}, {"Hgt", 472}, {"BCD", 383}};
  const auto target = model.simulate(truth, inc);
  const auto r0 = residuals(target, model, truth, inc);
  CHECK(r0.size() == 15 * inc.wavelengths.size());
  for (double v : r0) CHECK(v == 0.0);
  auto off = truth;
  off["TCD"] = 351;
  const auto r1 = residuals(target, model, off, inc);
  double norm = 0;
  for (double v : r1) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("forward-model Jacobian agrees with central differences") {
  const auto model = test_support::si_grating_model();
  IncidenceConfig inc;
  inc.wavelengths = {250, 400, 550, 700};
  inc.truncation_order = 5;
  inc.staircase_slices = 6;
  const auto target = model.simulate({{"TCD", 340}, {"Hgt", 480}, {"BCD", 390}}, inc);
  const std::vector<std::string> names{"TCD", "Hgt", "BCD"};
  const ResidualFn f = [&](const Eigen::VectorXd& p) {
    const auto r = residuals(target, model, {{"TCD", p[0]}, {"Hgt", p[1]}, {"BCD", p[2]}}, inc);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
  };
  const Bounds box{{250, 300, 250}, {550, 600, 550}};
  const auto p = vec({350, 472, 383});
  const double fd = 1e-4;
  const auto J = finite_diff_jacobian(f, p, f(p), fd, box);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double h = 0.5 * fd * (box.high[i] - box.low[i]);
    Eigen::VectorXd a = p, b = p;
    a[i] += h;
    b[i] -= h;
    const Eigen::VectorXd central = (f(a) - f(b)) / (2 * h);
    const double scale = central.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < central.size(); ++r) {
      if (std::abs(central[r]) < 0.05 * scale) continue;
      CHECK(std::abs(J(r, i) - central[r]) <= 0.05 * std::abs(central[r]));
    }
  }
}

TEST_CASE("noiseless Si fit from the sub-range medians") {
  const auto model = test_support::si_grating_model();
  IncidenceConfig inc;
  inc.wavelengths = IncidenceConfig::grid(200, 800, 40);
  inc.truncation_order = 5;
  inc.staircase_slices = 8;
  const ParamMap truth{{"TCD", 350}, {"Hgt", 472}, {"BCD", 383}};
  const auto target = model.simulate(truth, inc);
  const std::vector<ParamBound> bounds{{"TCD", 250, 550}, {"Hgt", 300, 600}, {"BCD", 250, 550}};
  const auto fit = lm_fit(target, model, {{"TCD", 362.5}, {"Hgt", 487.5}, {"BCD", 362.5}}, bounds, inc, LmConfig{});
  CHECK(fit.converged);
  for (const auto& [k, v] : truth) CHECK(std::abs(fit.params.at(k) - v) < 0.5);
  CHECK(fit.residual_norm >= 0.0);
  const auto report = format_fit_report(fit);
  CHECK(report.find("param TCD") != std::string::npos);
  CHECK(report.find("trace step cost damping TCD Hgt BCD") != std::string::npos);
  CHECK_THROWS_AS(lm_fit(target, model, {{"TCD", 600}, {"Hgt", 487.5}, {"BCD", 362.5}}, bounds, inc, LmConfig{}),
                  Error);
}

}
