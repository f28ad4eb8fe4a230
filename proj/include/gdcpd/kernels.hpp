#pragma once

#include <Eigen/Dense>

#include "gdcpd/errors.hpp"

namespace gdcpd {

enum class KernelType { Rbf, Ard };

// Hyperparameters shared by both kernels. The RBF kernel is isotropic and
// reads only the first length-scale; the ARD kernel keeps one per input
// dimension. noise_variance describes observation noise and is added to the
// Gram diagonal by the regression code, not by the kernel itself.
struct KernelHyperparams {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales = Eigen::VectorXd::Ones(1);
  double noise_variance = 0.0;

  // expected_dims < 0 skips the dimensionality check.
  void validate(int expected_dims = -1) const;
};

double rbf_eval(double t, double tp, const KernelHyperparams& hp);
double rbf_eval(const Eigen::VectorXd& t, const Eigen::VectorXd& tp,
                const KernelHyperparams& hp);

// d k(t, t') / d t'. The positive sign follows from the squared-exponential
// form: moving t' toward t increases covariance.
double rbf_grad_second_arg(double t, double tp, const KernelHyperparams& hp);
Eigen::VectorXd rbf_grad_second_arg(const Eigen::VectorXd& t,
                                    const Eigen::VectorXd& tp,
                                    const KernelHyperparams& hp);

// Mixed second derivative matrix H_ij = d^2 k / (d t_i d t'_j). At t == t'
// this is the prior covariance of the derivative process, sigma^2/l^2 * I.
Eigen::MatrixXd rbf_hessian_mixed(const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& tp,
                                  const KernelHyperparams& hp);

double ard_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                const KernelHyperparams& hp);

// Cross-covariance between two point sets (one point per row). With a == b
// this is the Gram matrix, which is symmetric PSD by construction.
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            KernelType type, const KernelHyperparams& hp);

// Diagonal term used when assembling C = K + sigma_n^2 I. Noise-free models
// still get a small jitter so coincident points keep C positive definite.
double observation_jitter(const KernelHyperparams& hp);

}  // namespace gdcpd
