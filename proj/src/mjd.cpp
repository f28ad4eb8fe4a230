#include "gdcpd/mjd.hpp"

#include <algorithm>
#include <cmath>

#include "gdcpd/errors.hpp"
#include "gdcpd/rng.hpp"

namespace gdcpd {

namespace {

void check_grid(double horizon, double dt) {
  if (!std::isfinite(horizon) || !std::isfinite(dt))
    throw std::domain_error("non-finite simulation grid");
  if (horizon <= 0.0 || dt <= 0.0)
    throw PreconditionError("horizon and dt must be positive");
  if (dt > horizon) throw PreconditionError("dt exceeds the horizon");
}

void check_event_times(const std::vector<double>& times, double horizon,
                       const char* what) {
  double prev = 0.0;
  for (double c : times) {
    if (!std::isfinite(c)) throw std::domain_error("non-finite event time");
    if (c <= prev || c >= horizon)
      throw PreconditionError(std::string(what) +
                              " must be strictly increasing inside (0, T)");
    prev = c;
  }
}

}  // namespace

void MjdParams::validate(double horizon) const {
  if (!std::isfinite(mu_pre) || !std::isfinite(mu_post) ||
      !std::isfinite(sigma) || !std::isfinite(jump_rate) ||
      !std::isfinite(jump_mean) || !std::isfinite(jump_std) ||
      !std::isfinite(s0))
    throw std::domain_error("non-finite jump-diffusion parameter");
  if (sigma < 0.0 || jump_rate < 0.0 || jump_std < 0.0)
    throw PreconditionError("sigma, jump_rate and jump_std must be >= 0");
  if (s0 <= 0.0) throw PreconditionError("initial value must be positive");
  check_event_times(change_points, horizon, "change-points");
  if (!planted_log_jumps.empty() &&
      planted_log_jumps.size() != change_points.size())
    throw PreconditionError(
        "planted jumps must be empty or match the change-points");
  for (double j : planted_log_jumps)
    if (!std::isfinite(j)) throw std::domain_error("non-finite planted jump");
}

namespace {

// Integral of the toggling drift over (a, b]. `first_after` is the index of
// the first change-point greater than a; its parity picks the regime.
double drift_integral(const MjdParams& p, double a, double b,
                      size_t first_after) {
  const auto mu_at = [&](size_t regime) {
    return regime % 2 == 0 ? p.mu_pre : p.mu_post;
  };
  double total = 0.0;
  double left = a;
  size_t idx = first_after;
  while (idx < p.change_points.size() && p.change_points[idx] < b) {
    total += mu_at(idx) * (p.change_points[idx] - left);
    left = p.change_points[idx];
    ++idx;
  }
  total += mu_at(idx) * (b - left);
  return total;
}

}  // namespace

MjdPath simulate_linear(const MjdParams& params, double horizon, double dt,
                        std::uint64_t seed) {
  check_grid(horizon, dt);
  params.validate(horizon);
  const auto n = static_cast<Eigen::Index>(std::llround(horizon / dt));
  if (n < 1) throw PreconditionError("grid has no steps");

  MjdPath path;
  path.times.resize(n + 1);
  path.values.resize(n + 1);
  path.times(0) = 0.0;
  path.values(0) = params.s0;

  const bool planted = !params.planted_log_jumps.empty();
  const double half_var = 0.5 * params.sigma * params.sigma;
  const double sqrt_dt = std::sqrt(dt);

  double log_s = std::log(params.s0);
  size_t cp_cursor = 0;  // first change-point with time > current step start
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t0 = static_cast<double>(i) * dt;
    const double t1 = static_cast<double>(i + 1) * dt;
    while (cp_cursor < params.change_points.size() &&
           params.change_points[cp_cursor] <= t0)
      ++cp_cursor;

    StreamRng rng(seed, static_cast<std::uint64_t>(i));
    const double xi = rng.normal();
    double dlog = drift_integral(params, t0, t1, cp_cursor) - half_var * dt +
                  params.sigma * sqrt_dt * xi;

    if (params.poisson_jumps && params.jump_rate > 0.0) {
      const int count = rng.poisson(params.jump_rate * dt);
      for (int j = 0; j < count; ++j) {
        dlog += rng.normal(params.jump_mean, params.jump_std);
        path.jump_times.push_back(t1);
      }
    }
    if (planted) {
      for (size_t c = cp_cursor; c < params.change_points.size() &&
                                 params.change_points[c] <= t1;
           ++c) {
        dlog += params.planted_log_jumps[c];
        path.jump_times.push_back(params.change_points[c]);
      }
    }

    log_s += dlog;
    if (!std::isfinite(log_s))
      throw SimulationError("log-path became non-finite at step " +
                            std::to_string(i));
    path.times(i + 1) = t1;
    path.values(i + 1) = std::exp(log_s);
  }
  std::sort(path.jump_times.begin(), path.jump_times.end());
  return path;
}

double nonlinear_euler_step(const NonlinearSpec& spec, double s, double t,
                            double dt, double xi, double jump_sum) {
  return s + spec.drift(s, t) * dt +
         spec.diffusion(s, t) * std::sqrt(dt) * xi +
         spec.jump_scale(s, t) * jump_sum;
}

MjdPath simulate_nonlinear(const NonlinearSpec& spec, double horizon,
                           double dt, std::uint64_t seed) {
  check_grid(horizon, dt);
  if (!spec.drift || !spec.diffusion || !spec.jump_scale)
    throw PreconditionError("nonlinear spec is missing a coefficient");
  if (spec.jump_rate < 0.0 || spec.jump_std < 0.0)
    throw PreconditionError("jump_rate and jump_std must be >= 0");
  if (spec.guard_min >= spec.guard_max)
    throw PreconditionError("empty guard range");
  check_event_times(spec.planted_jump_times, horizon, "planted jump times");
  if (spec.planted_jump_sizes.size() != spec.planted_jump_times.size())
    throw PreconditionError("planted jump sizes must match the times");

  const auto n = static_cast<Eigen::Index>(std::llround(horizon / dt));
  if (n < 1) throw PreconditionError("grid has no steps");

  MjdPath path;
  path.times.resize(n + 1);
  path.values.resize(n + 1);
  path.times(0) = 0.0;
  path.values(0) = spec.s0;

  double s = spec.s0;
  size_t planted_cursor = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t0 = static_cast<double>(i) * dt;
    const double t1 = static_cast<double>(i + 1) * dt;

    StreamRng rng(seed, static_cast<std::uint64_t>(i));
    const double xi = rng.normal();
    double jump_sum = 0.0;
    if (spec.jump_rate > 0.0) {
      const int count = rng.poisson(spec.jump_rate * dt);
      for (int j = 0; j < count; ++j) {
        jump_sum += rng.normal(spec.jump_mean, spec.jump_std);
        path.jump_times.push_back(t1);
      }
    }
    while (planted_cursor < spec.planted_jump_times.size() &&
           spec.planted_jump_times[planted_cursor] <= t1) {
      jump_sum += spec.planted_jump_sizes[planted_cursor];
      path.jump_times.push_back(spec.planted_jump_times[planted_cursor]);
      ++planted_cursor;
    }

    s = nonlinear_euler_step(spec, s, t0, dt, xi, jump_sum);
    if (!std::isfinite(s) || s < spec.guard_min || s > spec.guard_max)
      throw SimulationError("path left the guard range at step " +
                            std::to_string(i));
    path.times(i + 1) = t1;
    path.values(i + 1) = s;
  }
  std::sort(path.jump_times.begin(), path.jump_times.end());
  return path;
}

double jnr(double jump_rate, double jump_mean, double sigma) {
  if (!std::isfinite(jump_rate) || !std::isfinite(jump_mean) ||
      !std::isfinite(sigma))
    throw std::domain_error("non-finite jnr argument");
  if (sigma <= 0.0) throw std::domain_error("jnr requires sigma > 0");
  return jump_rate * jump_mean / sigma;
}

namespace {

MjdParams linear_base(double mu_pre, double mu_post, double sigma,
                      double rate, double mean, double std) {
  MjdParams p;
  p.mu_pre = mu_pre;
  p.mu_post = mu_post;
  p.sigma = sigma;
  p.jump_rate = rate;
  p.jump_mean = mean;
  p.jump_std = std;
  p.s0 = 1.0;
  return p;
}

Scenario linear_scenario(std::string name, const MjdParams& base,
                         std::vector<double> change_points, double horizon,
                         double dt, int window_a) {
  Scenario sc;
  sc.name = std::move(name);
  sc.linear = base;
  sc.linear.change_points = change_points;
  // Benchmark paths carry exactly the labeled events: one jump of the mean
  // size at each ground-truth time, no background stream.
  sc.linear.poisson_jumps = false;
  sc.linear.planted_log_jumps.assign(change_points.size(), base.jump_mean);
  sc.horizon = horizon;
  sc.dt = dt;
  sc.ground_truth = std::move(change_points);
  sc.window_a = window_a;
  return sc;
}

}  // namespace

std::vector<Scenario> scenario_suite() {
  std::vector<Scenario> suite;
  const double tau = 5.7057;

  suite.push_back(linear_scenario(
      "t_no", linear_base(0.0, 0.0, 0.1, 0.18, 0.1, 0.1), {tau}, 10.0, 1e-2,
      25));
  suite.push_back(linear_scenario(
      "t_up", linear_base(0.1, 0.1, 0.1, 0.18, 0.1, 0.1), {tau}, 10.0, 1e-2,
      25));
  suite.push_back(linear_scenario(
      "t_inv", linear_base(0.1, -0.05, 0.1, 0.18, 0.1, 0.1), {tau}, 10.0,
      1e-2, 25));
  suite.push_back(linear_scenario(
      "t_down", linear_base(0.06, 0.06, 0.1, 0.18, -0.1, 0.01), {tau}, 10.0,
      1e-2, 25));

  Scenario p_no;
  p_no.name = "p_no";
  p_no.nonlinear = true;
  p_no.horizon = 10.0;
  p_no.dt = 1e-2;
  p_no.ground_truth = {5.0};
  p_no.window_a = 25;
  p_no.logistic_pre = 0.01;
  p_no.trend_pre = 0.0;
  p_no.diff_pre = 0.1;
  // After the change the coefficients take the trending variant's values.
  p_no.logistic_post = 0.1;
  p_no.trend_post = 0.041;
  p_no.diff_post = 0.14;
  p_no.jump_scale = 0.1;
  p_no.planted_y = 1.0;
  suite.push_back(p_no);

  Scenario p_up = p_no;
  p_up.name = "p_up";
  p_up.logistic_pre = 0.1;
  p_up.trend_pre = 0.041;
  p_up.diff_pre = 0.14;
  p_up.logistic_post = 0.1;
  p_up.trend_post = 0.082;  // the trend itself steps up at the change
  p_up.diff_post = 0.14;
  suite.push_back(p_up);

  suite.push_back(linear_scenario(
      "mcp", linear_base(0.3, -0.4, 0.3, 0.9, -0.1, 0.2),
      {0.2861, 1.0263, 1.5904, 2.6647}, 4.0, 1e-3, 50));

  return suite;
}

NonlinearSpec scenario_nonlinear_spec(const Scenario& sc) {
  if (!sc.nonlinear)
    throw PreconditionError("scenario has no nonlinear specification");
  if (sc.ground_truth.size() != 1)
    throw PreconditionError("nonlinear scenarios carry a single change-point");
  const double tau = sc.ground_truth.front();

  NonlinearSpec spec;
  // Full truncation: coefficients see max(s, 0), so an Euler overshoot
  // below zero is absorbed rather than propagating NaN through sqrt.
  spec.drift = [sc, tau](double s, double t) {
    const double u = std::max(s, 0.0);
    return t < tau ? sc.logistic_pre * u * (1.0 - u) + sc.trend_pre * t
                   : sc.logistic_post * u * (1.0 - u) + sc.trend_post * t;
  };
  spec.diffusion = [sc, tau](double s, double t) {
    const double u = std::max(s, 0.0);
    return (t < tau ? sc.diff_pre : sc.diff_post) * std::sqrt(u);
  };
  spec.jump_scale = [sc](double, double) { return sc.jump_scale; };
  spec.s0 = 1.0;
  spec.planted_jump_times = {tau};
  spec.planted_jump_sizes = {sc.planted_y};
  spec.guard_min = -10.0;
  spec.guard_max = 100.0;
  return spec;
}

MjdPath simulate_scenario(const Scenario& sc, std::uint64_t seed) {
  if (sc.nonlinear)
    return simulate_nonlinear(scenario_nonlinear_spec(sc), sc.horizon, sc.dt,
                              seed);
  return simulate_linear(sc.linear, sc.horizon, sc.dt, seed);
}

}  // namespace gdcpd
