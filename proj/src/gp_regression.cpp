#include "gdcpd/gp_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gdcpd/lbfgs.hpp"

namespace gdcpd {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

void check_training_data(const Eigen::VectorXd& t, const Eigen::VectorXd& z) {
  if (t.size() != z.size())
    throw ShapeError("t and z have mismatched lengths: " +
                     std::to_string(t.size()) + " vs " + std::to_string(z.size()));
  if (t.size() == 0) throw PreconditionError("training data is empty");
  if (!t.allFinite() || !z.allFinite())
    throw std::domain_error("training data contains non-finite values");
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (t(i) <= t(i - 1))
      throw PreconditionError("timestamps must be strictly increasing");
}

// C = K + sigma_n^2 I, Cholesky-factorized. When the plain assembly is not
// positive definite the jitter escalates tenfold per attempt, up to
// 1e-2 * signal_variance; past that we give up.
Eigen::LLT<Eigen::MatrixXd> factor_covariance(const Eigen::MatrixXd& k,
                                              const KernelHyperparams& hp) {
  double jitter = observation_jitter(hp);
  const double ceiling = 1e-2 * hp.signal_variance;
  while (true) {
    Eigen::MatrixXd c = k;
    c.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) return llt;
    if (jitter >= ceiling)
      throw NumericalError(
          "covariance not positive definite after jitter escalation "
          "(signal_variance=" + std::to_string(hp.signal_variance) +
          ", length_scale=" + std::to_string(hp.length_scales(0)) +
          ", noise_variance=" + std::to_string(hp.noise_variance) + ")");
    jitter = std::min(jitter * 10.0, ceiling);
  }
}

Eigen::MatrixXd as_column(const Eigen::VectorXd& v) {
  Eigen::MatrixXd m(v.size(), 1);
  m.col(0) = v;
  return m;
}

}  // namespace

std::pair<double, Eigen::Vector3d> GpRegressor::nlml_and_gradient(
    const KernelHyperparams& hp, const Eigen::VectorXd& t,
    const Eigen::VectorXd& z) {
  hp.validate();
  check_training_data(t, z);
  const auto n = t.size();

  const Eigen::MatrixXd k =
      gram_matrix(as_column(t), as_column(t), KernelType::Rbf, hp);
  const auto llt = factor_covariance(k, hp);
  const Eigen::VectorXd alpha = llt.solve(z);

  double value = 0.5 * z.dot(alpha) + 0.5 * n * kLog2Pi;
  value += llt.matrixLLT().diagonal().array().log().sum();

  // A = C^{-1} - alpha alpha^T; each gradient entry is 0.5 * tr(A * dC).
  Eigen::MatrixXd a =
      llt.solve(Eigen::MatrixXd::Identity(n, n)) - alpha * alpha.transpose();

  const double l = hp.length_scales(0);
  Eigen::Vector3d grad;
  grad(0) = 0.5 * a.cwiseProduct(k).sum();  // dC/dlog sv = K
  double g_l = 0.0;                          // dC/dlog l = K .* d^2 / l^2
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = t(i) - t(j);
      g_l += a(i, j) * k(i, j) * d * d;
    }
  grad(1) = 0.5 * g_l / (l * l);
  grad(2) = 0.5 * hp.noise_variance * a.trace();  // zero when noise is zero
  return {value, grad};
}

double GpRegressor::nlml(const KernelHyperparams& hp, const Eigen::VectorXd& t,
                         const Eigen::VectorXd& z) {
  hp.validate();
  check_training_data(t, z);
  const auto n = t.size();
  const Eigen::MatrixXd k =
      gram_matrix(as_column(t), as_column(t), KernelType::Rbf, hp);
  const auto llt = factor_covariance(k, hp);
  double value = 0.5 * z.dot(llt.solve(z)) + 0.5 * n * kLog2Pi;
  value += llt.matrixLLT().diagonal().array().log().sum();
  return value;
}

void GpRegressor::assemble() {
  const Eigen::VectorXd zs = (z_.array() - z_mean_) / z_scale_;
  const Eigen::MatrixXd k =
      gram_matrix(as_column(t_), as_column(t_), KernelType::Rbf, hp_);
  llt_ = factor_covariance(k, hp_);
  alpha_ = llt_.solve(zs);
  nlml_ = 0.5 * zs.dot(alpha_) + 0.5 * t_.size() * kLog2Pi +
          llt_.matrixLLT().diagonal().array().log().sum();
}

GpRegressor GpRegressor::with_params(const Eigen::VectorXd& t,
                                     const Eigen::VectorXd& z,
                                     const KernelHyperparams& hp) {
  hp.validate();
  check_training_data(t, z);
  GpRegressor g;
  g.t_ = t;
  g.z_ = z;
  g.hp_ = hp;
  g.z_mean_ = z.mean();
  const double sd = std::sqrt((z.array() - g.z_mean_).square().mean());
  g.z_scale_ = sd > 1e-12 ? sd : 1.0;
  g.assemble();
  return g;
}

GpRegressor GpRegressor::fit(const Eigen::VectorXd& t, const Eigen::VectorXd& z,
                             const KernelHyperparams& init,
                             const GpFitOptions& opts) {
  init.validate();
  check_training_data(t, z);
  if (t.size() < 4)
    throw PreconditionError("need at least 4 points to fit hyperparameters");

  const double z_mean = z.mean();
  const double sd = std::sqrt((z.array() - z_mean).square().mean());
  const double z_scale = sd > 1e-12 ? sd : 1.0;
  const Eigen::VectorXd zs = (z.array() - z_mean) / z_scale;

  // Zero observation noise is a modelling statement (pure interpolation);
  // honor it by optimizing only the remaining two hyperparameters.
  const bool optimize_noise = init.noise_variance > 0.0;
  const int dim = optimize_noise ? 3 : 2;

  // Box the log-space search: constant targets (and other degenerate data)
  // push a variance toward zero, and an unbounded step would underflow it
  // to exactly 0, which is no longer a valid hyperparameter.
  const auto bounded = [](double v) { return std::clamp(v, -18.0, 18.0); };
  const auto unpack = [&](const Eigen::VectorXd& theta) {
    KernelHyperparams hp;
    hp.signal_variance = std::exp(bounded(theta(0)));
    hp.length_scales =
        Eigen::VectorXd::Constant(1, std::exp(bounded(theta(1))));
    hp.noise_variance = optimize_noise ? std::exp(bounded(theta(2))) : 0.0;
    return hp;
  };

  const Objective objective = [&](const Eigen::VectorXd& theta,
                                  Eigen::VectorXd& grad) -> double {
    grad.setZero(dim);
    if (!theta.allFinite()) return std::numeric_limits<double>::infinity();
    try {
      const auto [value, g3] = nlml_and_gradient(unpack(theta), t, zs);
      for (int i = 0; i < dim; ++i) grad(i) = g3(i);
      return value;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd theta0(dim);
  theta0(0) = std::log(init.signal_variance);
  theta0(1) = std::log(init.length_scales(0));
  if (optimize_noise) theta0(2) = std::log(init.noise_variance);

  std::mt19937_64 gen(opts.seed);
  std::uniform_real_distribution<double> offset(std::log(1e-2), std::log(1e2));

  LbfgsOptions lopt;
  lopt.max_iterations = opts.max_iterations;
  lopt.grad_tolerance = opts.grad_tolerance;

  bool have_best = false;
  double best_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  for (int start = 0; start <= opts.restarts; ++start) {
    Eigen::VectorXd theta = theta0;
    if (start > 0)
      for (int i = 0; i < dim; ++i) theta(i) += offset(gen);
    const auto res = lbfgs_minimize(objective, theta, lopt);
    if (std::isfinite(res.fx) && res.fx < best_value) {
      best_value = res.fx;
      best_theta = res.x;
      have_best = true;
    }
  }
  if (!have_best)
    throw FitError("all optimizer starts failed; last init signal_variance=" +
                   std::to_string(init.signal_variance));

  GpRegressor g;
  g.t_ = t;
  g.z_ = z;
  g.hp_ = unpack(best_theta);
  g.z_mean_ = z_mean;
  g.z_scale_ = z_scale;
  g.assemble();
  return g;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GpRegressor::posterior_mean_cov(
    const Eigen::VectorXd& query) const {
  if (t_.size() == 0) throw PreconditionError("model has no training data");
  if (!query.allFinite())
    throw std::domain_error("query times contain non-finite values");

  const Eigen::MatrixXd kq =
      gram_matrix(as_column(query), as_column(t_), KernelType::Rbf, hp_);
  Eigen::VectorXd mean = (kq * alpha_) * z_scale_;
  mean.array() += z_mean_;

  const Eigen::MatrixXd kqq =
      gram_matrix(as_column(query), as_column(query), KernelType::Rbf, hp_);
  Eigen::MatrixXd cov = kqq - kq * llt_.solve(kq.transpose());
  cov = 0.5 * (cov + cov.transpose()).eval();  // scrub asymmetric rounding
  cov *= z_scale_ * z_scale_;
  return {std::move(mean), std::move(cov)};
}

DerivativePosterior GpRegressor::derivative_posterior(
    const Eigen::VectorXd& query) const {
  if (t_.size() == 0) throw PreconditionError("model has no training data");
  if (!query.allFinite())
    throw std::domain_error("query times contain non-finite values");

  const double l2 = hp_.length_scales(0) * hp_.length_scales(0);
  // G(i, j) = d k(t_i, q_j) / d q_j
  Eigen::MatrixXd g =
      gram_matrix(as_column(t_), as_column(query), KernelType::Rbf, hp_);
  for (Eigen::Index j = 0; j < query.size(); ++j)
    g.col(j).array() *= (t_.array() - query(j)) / l2;

  DerivativePosterior out;
  out.mean = (g.transpose() * alpha_) * z_scale_;

  const Eigen::MatrixXd v = llt_.solve(g);
  const double prior_var = hp_.signal_variance / l2;
  out.variance.resize(query.size());
  for (Eigen::Index j = 0; j < query.size(); ++j) {
    const double raw = prior_var - g.col(j).dot(v.col(j));
    out.variance(j) = std::max(raw, 0.0) * z_scale_ * z_scale_;
  }
  return out;
}

nlohmann::json GpRegressor::to_json() const {
  nlohmann::json j;
  j["schema"] = "gdcpd.gp_regressor/1";
  j["signal_variance"] = hp_.signal_variance;
  j["length_scale"] = hp_.length_scales(0);
  j["noise_variance"] = hp_.noise_variance;
  j["target_mean"] = z_mean_;
  j["target_scale"] = z_scale_;
  j["train_t"] = std::vector<double>(t_.begin(), t_.end());
  j["train_z"] = std::vector<double>(z_.begin(), z_.end());
  return j;
}

GpRegressor GpRegressor::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "gdcpd.gp_regressor/1")
    throw IngestError("unsupported gp_regressor schema: " + j.value("schema", "<missing>"));
  GpRegressor g;
  g.hp_.signal_variance = j.at("signal_variance").get<double>();
  g.hp_.length_scales =
      Eigen::VectorXd::Constant(1, j.at("length_scale").get<double>());
  g.hp_.noise_variance = j.at("noise_variance").get<double>();
  const auto tv = j.at("train_t").get<std::vector<double>>();
  const auto zv = j.at("train_z").get<std::vector<double>>();
  g.t_ = Eigen::Map<const Eigen::VectorXd>(tv.data(), tv.size());
  g.z_ = Eigen::Map<const Eigen::VectorXd>(zv.data(), zv.size());
  g.z_mean_ = j.at("target_mean").get<double>();
  g.z_scale_ = j.at("target_scale").get<double>();
  g.hp_.validate();
  check_training_data(g.t_, g.z_);
  g.assemble();
  return g;
}

}  // namespace gdcpd
