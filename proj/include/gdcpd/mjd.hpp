#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gdcpd {

// Geometric jump-diffusion with a drift that toggles between mu_pre and
// mu_post at each change-point (pre before the first one, alternating
// thereafter). Jumps come from two sources: a background compound-Poisson
// stream with Normal(jump_mean, jump_std^2) log-sizes, and optional planted
// log-jumps of fixed size, one per change-point.
struct MjdParams {
  double mu_pre = 0.0;
  double mu_post = 0.0;
  double sigma = 0.1;
  double jump_rate = 0.0;  // Poisson intensity of the background stream
  double jump_mean = 0.0;
  double jump_std = 0.0;
  double s0 = 1.0;
  std::vector<double> change_points;      // strictly increasing, in (0, T)
  bool poisson_jumps = true;
  std::vector<double> planted_log_jumps;  // empty, or one per change-point

  void validate(double horizon) const;
};

struct MjdPath {
  Eigen::VectorXd times;           // n_steps + 1 entries, starting at 0
  Eigen::VectorXd values;
  std::vector<double> jump_times;  // realized jumps, ascending
};

// Steps the exact log-solution: each increment integrates the piecewise
// drift in closed form (split at change-points inside the step), so the only
// discretization is the sampling grid itself.
MjdPath simulate_linear(const MjdParams& params, double horizon, double dt,
                        std::uint64_t seed);

struct NonlinearSpec {
  std::function<double(double s, double t)> drift;
  std::function<double(double s, double t)> diffusion;
  std::function<double(double s, double t)> jump_scale;
  double jump_rate = 0.0;
  double jump_mean = 0.0;
  double jump_std = 0.0;
  double s0 = 1.0;
  std::vector<double> planted_jump_times;  // strictly increasing, in (0, T)
  std::vector<double> planted_jump_sizes;  // raw Y values, scaled by h
  double guard_min = -1e9;
  double guard_max = 1e9;
};

// One Euler-Maruyama increment: s + f dt + g sqrt(dt) xi + h * jump_sum.
// Exposed so tests can drive coarse and fine grids with shared noise.
double nonlinear_euler_step(const NonlinearSpec& spec, double s, double t,
                            double dt, double xi, double jump_sum);

MjdPath simulate_nonlinear(const NonlinearSpec& spec, double horizon,
                           double dt, std::uint64_t seed);

// Jump-noise ratio lambda * alpha / sigma.
double jnr(double jump_rate, double jump_mean, double sigma);

// One benchmark process with its ground-truth change-points and the window
// half-width the detector should use on it.
struct Scenario {
  std::string name;
  bool nonlinear = false;
  MjdParams linear;
  double horizon = 10.0;
  double dt = 1e-2;
  std::vector<double> ground_truth;
  int window_a = 25;

  // Nonlinear preset: f = logistic_coef * S(1-S) + trend * t,
  // g = diff_coef * sqrt(S), h = jump_scale; the _post values take over at
  // the ground-truth time.
  double logistic_pre = 0.0, logistic_post = 0.0;
  double trend_pre = 0.0, trend_post = 0.0;
  double diff_pre = 0.0, diff_post = 0.0;
  double jump_scale = 0.1;
  double planted_y = 1.0;
};

// The seven benchmark scenarios.
std::vector<Scenario> scenario_suite();

// Materializes the scenario's nonlinear coefficient functions.
NonlinearSpec scenario_nonlinear_spec(const Scenario& sc);

MjdPath simulate_scenario(const Scenario& sc, std::uint64_t seed);

}  // namespace gdcpd
