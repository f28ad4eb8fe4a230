#pragma once

#include <Eigen/Dense>
#include <functional>

namespace gdcpd {

struct LbfgsOptions {
  int max_iterations = 100;
  double grad_tolerance = 1e-6;  // stop when the gradient max-norm falls below
  int history = 10;
  int max_line_search = 50;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Objective callback: fills the gradient and returns f(x). Returning a
// non-finite value (or +inf on internal failure) makes the line search back
// off, so callers can map numerical breakdowns to +inf instead of throwing.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
// Monotone: the returned fx never exceeds f(x0) when f(x0) is finite.
LbfgsResult lbfgs_minimize(const Objective& fg, Eigen::VectorXd x0,
                           const LbfgsOptions& opt = {});

}  // namespace gdcpd
