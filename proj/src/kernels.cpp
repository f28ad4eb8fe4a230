#include "gdcpd/kernels.hpp"

#include <cmath>

namespace gdcpd {
namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string(what) + " is not finite");
}

void check_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string(what) + " contains non-finite entries");
}

void check_same_size(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ShapeError("kernel inputs have mismatched dimensions: " +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

}  // namespace

void KernelHyperparams::validate(int expected_dims) const {
  if (!std::isfinite(signal_variance) || signal_variance <= 0.0)
    throw std::domain_error("signal_variance must be positive and finite");
  if (length_scales.size() == 0)
    throw std::domain_error("at least one length-scale is required");
  if (!length_scales.allFinite() || (length_scales.array() <= 0.0).any())
    throw std::domain_error("length_scales must be positive and finite");
  if (!std::isfinite(noise_variance) || noise_variance < 0.0)
    throw std::domain_error("noise_variance must be non-negative and finite");
  if (expected_dims >= 0 && length_scales.size() != expected_dims)
    throw ShapeError("expected " + std::to_string(expected_dims) +
                     " length-scales, got " + std::to_string(length_scales.size()));
}

double rbf_eval(double t, double tp, const KernelHyperparams& hp) {
  hp.validate();
  check_finite(t, "t");
  check_finite(tp, "t'");
  const double l = hp.length_scales(0);
  const double d = t - tp;
  return hp.signal_variance * std::exp(-0.5 * d * d / (l * l));
}

double rbf_eval(const Eigen::VectorXd& t, const Eigen::VectorXd& tp,
                const KernelHyperparams& hp) {
  hp.validate();
  check_same_size(t, tp);
  check_finite(t, "t");
  check_finite(tp, "t'");
  const double l = hp.length_scales(0);
  return hp.signal_variance * std::exp(-0.5 * (t - tp).squaredNorm() / (l * l));
}

double rbf_grad_second_arg(double t, double tp, const KernelHyperparams& hp) {
  const double l = hp.length_scales(0);
  return (t - tp) / (l * l) * rbf_eval(t, tp, hp);
}

Eigen::VectorXd rbf_grad_second_arg(const Eigen::VectorXd& t,
                                    const Eigen::VectorXd& tp,
                                    const KernelHyperparams& hp) {
  const double k = rbf_eval(t, tp, hp);
  const double l2 = hp.length_scales(0) * hp.length_scales(0);
  return (t - tp) * (k / l2);
}

Eigen::MatrixXd rbf_hessian_mixed(const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& tp,
                                  const KernelHyperparams& hp) {
  const double k = rbf_eval(t, tp, hp);
  const double l2 = hp.length_scales(0) * hp.length_scales(0);
  const Eigen::VectorXd d = t - tp;
  Eigen::MatrixXd h = -d * d.transpose();
  h.diagonal().array() += l2;
  return h * (k / (l2 * l2));
}

double ard_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                const KernelHyperparams& hp) {
  check_same_size(x, xp);
  hp.validate(static_cast<int>(x.size()));
  check_finite(x, "x");
  check_finite(xp, "x'");
  const double q = ((x - xp).array() / hp.length_scales.array()).square().sum();
  return hp.signal_variance * std::exp(-0.5 * q);
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            KernelType type, const KernelHyperparams& hp) {
  if (a.size() > 0 && b.size() > 0 && a.cols() != b.cols())
    throw ShapeError("point sets have mismatched dimensions: " +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  if (type == KernelType::Ard)
    hp.validate(static_cast<int>(a.cols()));
  else
    hp.validate();
  if (!a.allFinite() || !b.allFinite())
    throw std::domain_error("point sets contain non-finite entries");

  Eigen::MatrixXd out(a.rows(), b.rows());
  if (out.size() == 0) return out;

  // Scale coordinates once so both kernels reduce to a plain squared
  // Euclidean distance.
  Eigen::MatrixXd as;
  Eigen::MatrixXd bs;
  if (type == KernelType::Ard) {
    as = a.array().rowwise() / hp.length_scales.transpose().array();
    bs = b.array().rowwise() / hp.length_scales.transpose().array();
  } else {
    const double l = hp.length_scales(0);
    as = a / l;
    bs = b / l;
  }
  const Eigen::VectorXd an = as.rowwise().squaredNorm();
  const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
  out = -2.0 * as * bs.transpose();
  out.colwise() += an;
  out.rowwise() += bn.transpose();
  // Guard the rounding of ||u - v||^2 computed via the expanded form.
  out = (out.array().max(0.0) * -0.5).exp() * hp.signal_variance;
  return out;
}

double observation_jitter(const KernelHyperparams& hp) {
  return hp.noise_variance > 0.0 ? hp.noise_variance : 1e-8 * hp.signal_variance;
}

}  // namespace gdcpd
