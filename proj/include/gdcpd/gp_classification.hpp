#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "gdcpd/kernels.hpp"

namespace gdcpd {

struct GpClassifierOptions {
  int restarts = 3;          // random restarts around the init, as in regression
  int max_iterations = 100;  // quasi-Newton iterations per start
  double grad_tolerance = 1e-6;
  int max_newton = 100;      // mode-finding iterations per evaluation
  std::uint64_t seed = 0xC1A55;
};

// Binary GP classification with a probit link and the Laplace approximation.
// The ARD kernel's fitted length-scales double as feature relevance: a small
// scale means the class probability moves quickly along that input, so the
// feature matters.
class GpClassifier {
 public:
  GpClassifier() = default;

  // labels are 0/1; both classes must be present and rows >= 10. Features
  // are standardized internally so length-scales are comparable across
  // dimensions. The init's length_scales must have one entry per feature
  // column (or a single entry, broadcast to all columns).
  static GpClassifier fit_laplace(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const KernelHyperparams& init,
                                  const GpClassifierOptions& opts = {});

  // P(label == 1) for each query row.
  Eigen::VectorXd predict_prob(const Eigen::MatrixXd& queries) const;

  const Eigen::VectorXd& lengthscales() const { return hp_.length_scales; }
  double signal_variance() const { return hp_.signal_variance; }
  double log_marginal() const { return log_marginal_; }

  // (feature index, length-scale) pairs sorted by increasing length-scale,
  // i.e. most relevant first.
  std::vector<std::pair<int, double>> relevance_ranking() const;

 private:
  Eigen::MatrixXd x_;       // standardized training inputs
  Eigen::VectorXd y_;       // labels remapped to -1/+1
  KernelHyperparams hp_;
  Eigen::VectorXd x_mean_, x_scale_;
  double log_marginal_ = 0.0;
  // Laplace state at the fitted mode, kept for prediction.
  Eigen::VectorXd grad_loglik_, sqrt_w_;
  Eigen::LLT<Eigen::MatrixXd> chol_b_;
};

// Indices whose length-scale is strictly below the threshold, sorted by
// increasing length-scale (most relevant first).
std::vector<int> select_features(const Eigen::VectorXd& lengthscales,
                                 double threshold);

// Laplace-approximate log marginal likelihood of the probit model and its
// gradient in (log signal_variance, log lengthscale_1..D) space, evaluated
// on the inputs exactly as given (no standardization). Exposed so the
// gradient can be verified independently.
std::pair<double, Eigen::VectorXd> laplace_log_marginal(
    const Eigen::MatrixXd& x, const std::vector<int>& labels,
    const KernelHyperparams& hp);

}  // namespace gdcpd
