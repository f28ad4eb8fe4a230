#include "gdcpd/lbfgs.hpp"

#include <cmath>
#include <deque>

namespace gdcpd {

LbfgsResult lbfgs_minimize(const Objective& fg, Eigen::VectorXd x0,
                           const LbfgsOptions& opt) {
  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad(n);
  double fx = fg(x, grad);

  LbfgsResult res;
  res.x = x;
  res.fx = fx;
  res.grad_norm = grad.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(fx)) return res;  // nothing sensible to do from here
  if (res.grad_norm <= opt.grad_tolerance) {
    res.converged = true;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd direction(n), x_new(n), grad_new(n);

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    // two-loop recursion for direction = -H * grad
    direction = -grad;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      direction *= gamma;
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(direction);
      direction += (alpha[i] - beta) * s_hist[i];
    }

    double descent = grad.dot(direction);
    if (!(descent < 0.0)) {  // fall back to steepest descent
      direction = -grad;
      descent = -grad.squaredNorm();
    }

    // Armijo backtracking; shrink on non-finite objective values too.
    double step = (iter == 1) ? std::min(1.0, 1.0 / grad.lpNorm<1>()) : 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = x + step * direction;
      f_new = fg(x_new, grad_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * descent) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stuck; report the best point found so far

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    // Skip updates that would break positive-definiteness of H.
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    x = x_new;
    fx = f_new;
    grad = grad_new;
    res.x = x;
    res.fx = fx;
    res.iterations = iter;
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opt.grad_tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace gdcpd
