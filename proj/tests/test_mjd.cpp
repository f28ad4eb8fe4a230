#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "gdcpd/errors.hpp"
#include "gdcpd/mjd.hpp"
#include "gdcpd/rng.hpp"

using gdcpd::MjdParams;
using gdcpd::MjdPath;
using gdcpd::NonlinearSpec;
using gdcpd::PreconditionError;
using gdcpd::Scenario;
using gdcpd::SimulationError;

namespace {

MjdParams quiet_params(double mu) {
  MjdParams p;
  p.mu_pre = p.mu_post = mu;
  p.sigma = 0.0;
  p.jump_rate = 0.0;
  return p;
}

}  // namespace

TEST_SUITE("mjd") {

TEST_CASE("deterministic limit is pure exponential growth") {
  const MjdPath path = gdcpd::simulate_linear(quiet_params(0.07), 2.0, 1e-2, 5);
  REQUIRE(path.values.size() == 201);
  CHECK(path.times(0) == 0.0);
  CHECK(path.values(0) == 1.0);
  for (int i = 0; i <= 200; i += 40)
    CHECK(path.values(i) ==
          doctest::Approx(std::exp(0.07 * path.times(i))).epsilon(1e-12));
  CHECK(path.jump_times.empty());
}

TEST_CASE("drift toggling integrates sub-step pieces exactly") {
  MjdParams p = quiet_params(0.2);
  p.mu_post = -0.1;
  p.change_points = {0.503};  // strictly inside a grid step
  const MjdPath path = gdcpd::simulate_linear(p, 1.0, 1e-2, 5);
  const double expected = std::exp(0.2 * 0.503 - 0.1 * (1.0 - 0.503));
  CHECK(path.values(100) == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("a second toggle returns to the pre drift") {
    p.change_points = {0.25, 0.75};
    const MjdPath twice = gdcpd::simulate_linear(p, 1.0, 1e-2, 5);
    const double e2 = std::exp(0.2 * 0.25 - 0.1 * 0.5 + 0.2 * 0.25);
    CHECK(twice.values(100) == doctest::Approx(e2).epsilon(1e-12));
  }
}

TEST_CASE("planted jumps land at their exact times") {
  MjdParams p = quiet_params(0.0);
  p.change_points = {0.555};
  p.planted_log_jumps = {0.3};
  p.poisson_jumps = false;
  const MjdPath path = gdcpd::simulate_linear(p, 1.0, 1e-2, 9);
  CHECK(path.values(55) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(path.values(56) == doctest::Approx(std::exp(0.3)).epsilon(1e-12));
  CHECK(path.values(100) == doctest::Approx(std::exp(0.3)).epsilon(1e-12));
  REQUIRE(path.jump_times.size() == 1);
  CHECK(path.jump_times[0] == 0.555);
}

TEST_CASE("log increment moments match the analytic drift") {
  // Monte Carlo oracle: E[dlog S / dt] = mu - sigma^2/2 + lambda * alpha.
  MjdParams p;
  p.mu_pre = p.mu_post = 0.05;
  p.sigma = 0.1;
  p.jump_rate = 0.18;
  p.jump_mean = 0.1;
  p.jump_std = 0.1;
  const double horizon = 1.0;
  const int reps = 10000;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    const MjdPath path =
        gdcpd::simulate_linear(p, horizon, 1e-2, 40000 + r);
    sum += std::log(path.values(path.values.size() - 1)) / horizon;
  }
  const double mean = sum / reps;
  const double expected = 0.05 - 0.5 * 0.01 + 0.18 * 0.1;
  // Increment variance rate sigma^2 + lambda (alpha^2 + delta^2).
  const double se =
      std::sqrt((0.01 + 0.18 * 0.02) / horizon) / std::sqrt(double(reps));
  CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("diffusion-only increments look gaussian") {
  MjdParams p;
  p.mu_pre = p.mu_post = 0.05;
  p.sigma = 0.1;
  p.jump_rate = 0.0;
  const double dt = 1e-2;
  const MjdPath path = gdcpd::simulate_linear(p, 100.0, dt, 31);
  const int n = 10000;
  REQUIRE(path.values.size() == n + 1);
  Eigen::VectorXd inc(n);
  for (int i = 0; i < n; ++i)
    inc(i) = std::log(path.values(i + 1)) - std::log(path.values(i));

  const double mean = inc.mean();
  const Eigen::ArrayXd centered = inc.array() - mean;
  const double var = centered.square().mean();
  const double sd = std::sqrt(var);
  const double skew = (centered / sd).cube().mean();
  const double kurt = (centered / sd).pow(4).mean();

  CHECK(std::abs(mean - (0.05 * dt - 0.5 * 0.01 * dt)) < 3.5e-4);
  CHECK(var == doctest::Approx(0.01 * dt).epsilon(0.05));
  CHECK(std::abs(skew) < 0.1);
  CHECK(kurt == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("changing the post drift preserves the pre-change prefix") {
  MjdParams a;
  a.mu_pre = 0.1;
  a.mu_post = 0.1;
  a.sigma = 0.1;
  a.jump_rate = 0.18;
  a.jump_mean = 0.1;
  a.jump_std = 0.1;
  a.change_points = {5.505};
  MjdParams b = a;
  b.mu_post = -0.4;

  const MjdPath pa = gdcpd::simulate_linear(a, 10.0, 1e-2, 77);
  const MjdPath pb = gdcpd::simulate_linear(b, 10.0, 1e-2, 77);
  for (int i = 0; i <= 550; ++i) CHECK(pa.values(i) == pb.values(i));
  CHECK(pa.values(551) != pb.values(551));
}

TEST_CASE("seed determinism") {
  MjdParams p;
  p.sigma = 0.1;
  p.jump_rate = 0.18;
  p.jump_mean = 0.1;
  p.jump_std = 0.1;
  const MjdPath one = gdcpd::simulate_linear(p, 10.0, 1e-2, 123);
  const MjdPath two = gdcpd::simulate_linear(p, 10.0, 1e-2, 123);
  CHECK(one.values == two.values);
  CHECK(one.jump_times == two.jump_times);
  const MjdPath other = gdcpd::simulate_linear(p, 10.0, 1e-2, 124);
  CHECK(one.values != other.values);
}

TEST_CASE("a degenerate nonlinear spec yields a constant path") {
  NonlinearSpec spec;
  spec.drift = [](double, double) { return 0.0; };
  spec.diffusion = [](double, double) { return 0.0; };
  spec.jump_scale = [](double, double) { return 0.0; };
  spec.s0 = 0.7;
  const MjdPath path = gdcpd::simulate_nonlinear(spec, 1.0, 1e-2, 3);
  for (int i = 0; i <= 100; ++i) CHECK(path.values(i) == 0.7);
}

TEST_CASE("euler path self-converges against a hundredfold finer grid") {
  // Both grids are driven through the exposed stepper with a shared
  // brownian path, so only the discretization differs.
  NonlinearSpec spec;
  spec.drift = [](double s, double) {
    const double u = std::max(s, 0.0);
    return 0.01 * u * (1.0 - u);
  };
  spec.diffusion = [](double s, double) {
    return 0.1 * std::sqrt(std::max(s, 0.0));
  };
  spec.jump_scale = [](double, double) { return 0.1; };
  spec.s0 = 1.0;

  const double dt = 1e-2;
  const int refine = 100;
  const double dt_fine = dt / refine;
  const int n = 1000;  // n * dt = 10 time units

  double coarse = spec.s0;
  double fine = spec.s0;
  double worst = 0.0;
  gdcpd::StreamRng rng(2718, 0);
  for (int i = 0; i < n; ++i) {
    double dw = 0.0;
    for (int j = 0; j < refine; ++j) {
      const double xi = rng.normal();
      dw += std::sqrt(dt_fine) * xi;
      const double t = i * dt + j * dt_fine;
      fine = gdcpd::nonlinear_euler_step(spec, fine, t, dt_fine, xi, 0.0);
    }
    const double xi_coarse = dw / std::sqrt(dt);
    coarse =
        gdcpd::nonlinear_euler_step(spec, coarse, i * dt, dt, xi_coarse, 0.0);
    worst = std::max(worst, std::abs(coarse - fine));
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("halving dt keeps the mean jump count") {
  NonlinearSpec spec;
  spec.drift = [](double, double) { return 0.0; };
  spec.diffusion = [](double, double) { return 0.0; };
  spec.jump_scale = [](double, double) { return 1.0; };
  spec.jump_rate = 0.9;
  spec.jump_mean = 0.0;
  spec.jump_std = 0.1;
  spec.guard_min = -1e6;
  spec.guard_max = 1e6;

  const int reps = 2000;
  double coarse_total = 0.0, fine_total = 0.0;
  for (int r = 0; r < reps; ++r) {
    coarse_total += static_cast<double>(
        gdcpd::simulate_nonlinear(spec, 10.0, 1e-2, 9000 + r)
            .jump_times.size());
    fine_total += static_cast<double>(
        gdcpd::simulate_nonlinear(spec, 10.0, 5e-3, 90000 + r)
            .jump_times.size());
  }
  const double coarse_mean = coarse_total / reps;
  const double fine_mean = fine_total / reps;
  CHECK(std::abs(coarse_mean - fine_mean) / 9.0 < 0.02);
  CHECK(coarse_mean == doctest::Approx(9.0).epsilon(0.05));
}

TEST_CASE("the guard range aborts escaping paths with the step index") {
  NonlinearSpec spec;
  spec.drift = [](double, double) { return 1.0; };
  spec.diffusion = [](double, double) { return 0.0; };
  spec.jump_scale = [](double, double) { return 0.0; };
  spec.s0 = 0.5;
  spec.guard_min = 0.0;
  spec.guard_max = 1.005;
  try {
    gdcpd::simulate_nonlinear(spec, 1.0, 1e-2, 1);
    FAIL("expected a simulation error");
  } catch (const SimulationError& e) {
    const std::string what = e.what();
    CHECK(what.find("step") != std::string::npos);
    CHECK(what.find("50") != std::string::npos);
  }
}

TEST_CASE("scenario suite carries the published configurations") {
  const std::vector<Scenario> suite = gdcpd::scenario_suite();
  REQUIRE(suite.size() == 7);
  CHECK(suite[0].name == "t_no");
  CHECK(suite[1].name == "t_up");
  CHECK(suite[2].name == "t_inv");
  CHECK(suite[3].name == "t_down");
  CHECK(suite[4].name == "p_no");
  CHECK(suite[5].name == "p_up");
  CHECK(suite[6].name == "mcp");

  CHECK(suite[2].linear.mu_pre == 0.1);
  CHECK(suite[2].linear.mu_post == -0.05);
  CHECK(suite[3].linear.jump_mean == -0.1);
  CHECK(suite[3].linear.jump_std == 0.01);

  for (const Scenario& sc : suite) {
    REQUIRE(!sc.ground_truth.empty());
    for (double tau : sc.ground_truth) {
      CHECK(tau > 0.0);
      CHECK(tau < sc.horizon);
    }
    CHECK(sc.window_a >= 1);
  }
  CHECK(suite[0].ground_truth == std::vector<double>{5.7057});
  CHECK(suite[4].ground_truth == std::vector<double>{5.0});
  CHECK(suite[6].ground_truth ==
        std::vector<double>{0.2861, 1.0263, 1.5904, 2.6647});
  CHECK(suite[6].horizon == 4.0);
  CHECK(suite[6].dt == 1e-3);
  CHECK(suite[6].window_a == 50);
}

TEST_CASE("every scenario simulates to a finite path of the right length") {
  for (const Scenario& sc : gdcpd::scenario_suite()) {
    const MjdPath path = gdcpd::simulate_scenario(sc, 42);
    const auto steps = static_cast<Eigen::Index>(
        std::llround(sc.horizon / sc.dt));
    REQUIRE(path.values.size() == steps + 1);
    CHECK(path.values.allFinite());
    if (!sc.nonlinear) {
      CHECK(path.values.minCoeff() > 0.0);
      CHECK(path.jump_times.size() == sc.ground_truth.size());
    }
  }
}

TEST_CASE("jump-noise ratio arithmetic") {
  CHECK(gdcpd::jnr(0.18, 0.1, 0.1) == doctest::Approx(0.18).epsilon(1e-14));
  CHECK(gdcpd::jnr(0.18, 0.0, 0.1) == 0.0);
  CHECK(gdcpd::jnr(0.36, 0.1, 0.1) ==
        doctest::Approx(2.0 * gdcpd::jnr(0.18, 0.1, 0.1)).epsilon(1e-14));
  CHECK_THROWS_AS(gdcpd::jnr(0.18, 0.1, 0.0), std::domain_error);
}

TEST_CASE("parameter validation") {
  MjdParams p;
  p.s0 = 0.0;
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, 1.0, 1e-2, 0), PreconditionError);
  p.s0 = 1.0;
  p.sigma = -0.1;
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, 1.0, 1e-2, 0), PreconditionError);
  p.sigma = 0.1;
  p.change_points = {0.8, 0.4};
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, 1.0, 1e-2, 0), PreconditionError);
  p.change_points = {0.4, 0.8};
  p.planted_log_jumps = {0.1};
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, 1.0, 1e-2, 0), PreconditionError);
  p.planted_log_jumps.clear();
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, -1.0, 1e-2, 0),
                  PreconditionError);
  CHECK_THROWS_AS(gdcpd::simulate_linear(p, 1.0, 2.0, 0), PreconditionError);

  NonlinearSpec spec;
  CHECK_THROWS_AS(gdcpd::simulate_nonlinear(spec, 1.0, 1e-2, 0),
                  PreconditionError);
}

}  // TEST_SUITE
