#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <utility>

#include "gdcpd/kernels.hpp"

namespace gdcpd {

// Posterior over the time derivative of the latent function, evaluated at a
// set of query times.
struct DerivativePosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

struct GpFitOptions {
  int restarts = 3;        // random restarts in addition to the given init
  int max_iterations = 100;
  double grad_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

// One-dimensional GP regression over time with the RBF kernel. Targets are
// standardized internally; every public prediction is returned on the
// original target scale.
class GpRegressor {
 public:
  GpRegressor() = default;

  // Assembles the model with the given hyperparameters, no optimization.
  static GpRegressor with_params(const Eigen::VectorXd& t,
                                 const Eigen::VectorXd& z,
                                 const KernelHyperparams& hp);

  // Maximum-likelihood fit: quasi-Newton descent on the negative log
  // marginal likelihood in log-hyperparameter space, keeping the best of the
  // init plus `restarts` random starts drawn log-uniformly over [1e-2, 1e2]
  // around it. A zero noise_variance in the init is held fixed at zero (the
  // Gram diagonal then gets a 1e-8 * signal_variance jitter).
  static GpRegressor fit(const Eigen::VectorXd& t, const Eigen::VectorXd& z,
                         const KernelHyperparams& init,
                         const GpFitOptions& opts = {});

  static double nlml(const KernelHyperparams& hp, const Eigen::VectorXd& t,
                     const Eigen::VectorXd& z);

  // Gradient is with respect to (log signal_variance, log length_scale,
  // log noise_variance), in that order.
  static std::pair<double, Eigen::Vector3d> nlml_and_gradient(
      const KernelHyperparams& hp, const Eigen::VectorXd& t,
      const Eigen::VectorXd& z);

  std::pair<Eigen::VectorXd, Eigen::MatrixXd> posterior_mean_cov(
      const Eigen::VectorXd& query) const;

  DerivativePosterior derivative_posterior(const Eigen::VectorXd& query) const;

  const KernelHyperparams& params() const { return hp_; }
  const Eigen::VectorXd& train_inputs() const { return t_; }
  const Eigen::VectorXd& train_targets() const { return z_; }
  double target_mean() const { return z_mean_; }
  double target_scale() const { return z_scale_; }
  // Negative log marginal likelihood of the standardized targets at the
  // stored hyperparameters.
  double fitted_nlml() const { return nlml_; }

  nlohmann::json to_json() const;
  static GpRegressor from_json(const nlohmann::json& j);

 private:
  void assemble();

  Eigen::VectorXd t_, z_;
  KernelHyperparams hp_;
  double z_mean_ = 0.0, z_scale_ = 1.0;
  double nlml_ = 0.0;
  Eigen::VectorXd alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace gdcpd
