#include "gdcpd/gp_classification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "gdcpd/lbfgs.hpp"

namespace gdcpd {
namespace {

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// phi(z) / Phi(z), stable deep in the left tail where both terms underflow.
double inverse_mills(double z) {
  if (z > -30.0) return std_normal_pdf(z) / std_normal_cdf(z);
  const double zi = 1.0 / (z * z);
  // asymptotic series for Phi(z) = phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - ...)
  return -z / (1.0 - zi * (1.0 - 3.0 * zi * (1.0 - 5.0 * zi)));
}

double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(std_normal_cdf(z));
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::log(inverse_mills(z));
}

// Probit log-likelihood derivatives at z = y * f.
struct ProbitDerivs {
  double loglik;  // log Phi(z)
  double d1;      // d/df
  double w;       // -d^2/df^2, always >= 0
  double d3;      // d^3/df^3
};

ProbitDerivs probit_derivs(double y, double f) {
  const double z = y * f;
  const double r = inverse_mills(z);
  ProbitDerivs out;
  out.loglik = log_normal_cdf(z);
  out.d1 = y * r;
  out.w = std::max(r * (z + r), 1e-12);
  out.d3 = y * r * ((z + 2.0 * r) * (z + r) - 1.0);
  return out;
}

struct LaplaceState {
  Eigen::VectorXd f;          // posterior mode
  Eigen::VectorXd a;          // K^{-1} f at the mode
  Eigen::VectorXd grad_loglik;
  Eigen::VectorXd sqrt_w;
  Eigen::VectorXd d3;
  Eigen::LLT<Eigen::MatrixXd> chol_b;  // B = I + W^1/2 K W^1/2
  double loglik = 0.0;
  double log_z = 0.0;  // Laplace log marginal likelihood
};

// Newton iteration from Rasmussen & Williams, algorithm 3.1, with step
// halving as a safety net. Iterates until K^{-1} f and the likelihood
// gradient agree to 1e-6 in max-norm (the stationarity contract).
LaplaceState laplace_mode(const Eigen::MatrixXd& k, const Eigen::VectorXd& y,
                          Eigen::VectorXd f0, int max_newton) {
  const Eigen::Index n = y.size();
  LaplaceState st;
  st.f = std::move(f0);
  if (st.f.size() != n) st.f = Eigen::VectorXd::Zero(n);
  st.a = Eigen::VectorXd::Zero(n);

  double psi_old = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd f_prev = st.f;
  Eigen::VectorXd a_prev = st.a;

  for (int it = 0; it < max_newton; ++it) {
    Eigen::VectorXd w(n);
    st.grad_loglik.resize(n);
    st.d3.resize(n);
    st.loglik = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto d = probit_derivs(y(i), st.f(i));
      st.grad_loglik(i) = d.d1;
      w(i) = d.w;
      st.d3(i) = d.d3;
      st.loglik += d.loglik;
    }
    st.sqrt_w = w.cwiseSqrt();

    Eigen::MatrixXd b = st.sqrt_w.asDiagonal() * k * st.sqrt_w.asDiagonal();
    b.diagonal().array() += 1.0;
    st.chol_b.compute(b);
    if (st.chol_b.info() != Eigen::Success)
      throw NumericalError("Laplace inner factorization failed");

    const Eigen::VectorXd rhs = w.cwiseProduct(st.f) + st.grad_loglik;
    const Eigen::VectorXd inner =
        st.chol_b.solve(st.sqrt_w.cwiseProduct(k * rhs));
    Eigen::VectorXd a_new = rhs - st.sqrt_w.cwiseProduct(inner);
    Eigen::VectorXd f_new = k * a_new;

    // psi(f) = log p(y|f) - f' K^{-1} f / 2, the objective Newton climbs
    double loglik_new = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      loglik_new += probit_derivs(y(i), f_new(i)).loglik;
    double psi = loglik_new - 0.5 * a_new.dot(f_new);

    int halvings = 0;
    while (psi < psi_old && halvings < 30) {
      a_new = 0.5 * (a_new + a_prev);
      f_new = k * a_new;
      loglik_new = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        loglik_new += probit_derivs(y(i), f_new(i)).loglik;
      psi = loglik_new - 0.5 * a_new.dot(f_new);
      ++halvings;
    }

    if (!std::isfinite(psi))
      throw NumericalError("Laplace objective diverged");

    const double shift = (f_new - st.f).lpNorm<Eigen::Infinity>();
    st.f = f_new;
    st.a = a_new;
    f_prev = f_new;
    a_prev = a_new;
    psi_old = psi;

    if (shift < 1e-10) break;
    // stationarity: grad log p(y|f) must match K^{-1} f at the mode
    Eigen::VectorXd grad_now(n);
    for (Eigen::Index i = 0; i < n; ++i)
      grad_now(i) = probit_derivs(y(i), st.f(i)).d1;
    if ((grad_now - st.a).lpNorm<Eigen::Infinity>() < 1e-6 && it > 0) break;
  }

  // refresh the likelihood terms at the final mode
  st.loglik = 0.0;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto d = probit_derivs(y(i), st.f(i));
    st.grad_loglik(i) = d.d1;
    w(i) = d.w;
    st.d3(i) = d.d3;
    st.loglik += d.loglik;
  }
  st.sqrt_w = w.cwiseSqrt();
  Eigen::MatrixXd b = st.sqrt_w.asDiagonal() * k * st.sqrt_w.asDiagonal();
  b.diagonal().array() += 1.0;
  st.chol_b.compute(b);
  if (st.chol_b.info() != Eigen::Success)
    throw NumericalError("Laplace factorization failed at the mode");

  if ((st.grad_loglik - st.a).lpNorm<Eigen::Infinity>() > 1e-5)
    throw NumericalError("Laplace mode finding did not reach stationarity");

  st.log_z = st.loglik - 0.5 * st.a.dot(st.f) -
             st.chol_b.matrixLLT().diagonal().array().log().sum();
  return st;
}

Eigen::MatrixXd ard_gram(const Eigen::MatrixXd& x, const KernelHyperparams& hp) {
  Eigen::MatrixXd k = gram_matrix(x, x, KernelType::Ard, hp);
  k.diagonal().array() += 1e-8 * hp.signal_variance;
  return k;
}

// Laplace marginal likelihood gradient w.r.t. the log-hyperparameters
// (log signal_variance, log lengthscale_1..D), following Rasmussen &
// Williams algorithm 5.1: an explicit term through K plus the implicit term
// through the moving mode.
Eigen::VectorXd log_z_gradient(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& k,
                               const KernelHyperparams& hp,
                               const LaplaceState& st) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  const Eigen::MatrixXd b_inv =
      st.chol_b.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd r =
      st.sqrt_w.asDiagonal() * b_inv * st.sqrt_w.asDiagonal();
  const Eigen::MatrixXd c2 =
      st.chol_b.matrixL().solve(st.sqrt_w.asDiagonal() * k);
  // diag of the Laplace posterior covariance (K^{-1} + W)^{-1}
  const Eigen::VectorXd post_var =
      k.diagonal() - c2.colwise().squaredNorm().transpose();
  // The moving mode enters only through log|B|, whose derivative in f_i is
  // -1/2 post_var_i * dW_ii/df_i; with W = -d2 loglik that is +1/2 * d3.
  const Eigen::VectorXd s2 = 0.5 * post_var.cwiseProduct(st.d3);

  Eigen::VectorXd grad(d + 1);
  for (Eigen::Index j = 0; j < d + 1; ++j) {
    Eigen::MatrixXd dk;
    if (j == 0) {
      dk = k;  // d K / d log signal_variance
    } else {
      const double lam = hp.length_scales(j - 1);
      const Eigen::VectorXd col = x.col(j - 1);
      dk = k.cwiseProduct(
          ((col.replicate(1, n) - col.transpose().replicate(n, 1)) / lam)
              .array()
              .square()
              .matrix());
    }
    const double s1 =
        0.5 * st.a.dot(dk * st.a) - 0.5 * r.cwiseProduct(dk).sum();
    const Eigen::VectorXd beta = dk * st.grad_loglik;
    const Eigen::VectorXd s3 = beta - k * (r * beta);
    grad(j) = s1 + s2.dot(s3);
  }
  return grad;
}

}  // namespace

GpClassifier GpClassifier::fit_laplace(const Eigen::MatrixXd& features,
                                       const std::vector<int>& labels,
                                       const KernelHyperparams& init,
                                       const GpClassifierOptions& opts) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (n != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("features and labels have mismatched lengths");
  if (n < 10) throw PreconditionError("need at least 10 rows to classify");
  if (d < 1) throw PreconditionError("need at least one feature column");
  if (!features.allFinite())
    throw std::domain_error("features contain non-finite values");

  int positives = 0;
  for (const int l : labels) {
    if (l != 0 && l != 1) throw std::domain_error("labels must be 0 or 1");
    positives += l;
  }
  if (positives == 0 || positives == static_cast<int>(labels.size()))
    throw PreconditionError("both classes must be present");

  KernelHyperparams hp0 = init;
  if (hp0.length_scales.size() == 1 && d > 1)
    hp0.length_scales = Eigen::VectorXd::Constant(d, hp0.length_scales(0));
  hp0.validate(static_cast<int>(d));

  GpClassifier cls;
  cls.y_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) cls.y_(i) = labels[i] == 1 ? 1.0 : -1.0;

  cls.x_mean_ = features.colwise().mean();
  cls.x_scale_.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (features.col(j).array() - cls.x_mean_(j)).square().mean();
    cls.x_scale_(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  cls.x_ = (features.rowwise() - cls.x_mean_.transpose()).array().rowwise() /
           cls.x_scale_.transpose().array();

  // The search moves the log length-scales only. The signal variance
  // stays where the caller put it: with a probit link the latent scale
  // trades off against lambda, and letting both float lets amplitude
  // substitute for structure, which muddies the relevance ranking the
  // length-scales exist to provide.
  const auto unpack = [&](const Eigen::VectorXd& theta) {
    KernelHyperparams hp;
    hp.signal_variance = hp0.signal_variance;
    hp.length_scales = theta.array().exp();
    hp.noise_variance = 0.0;
    return hp;
  };

  // Warm-starting the mode across objective evaluations cuts the Newton
  // count roughly in half; correctness is unaffected since the mode is the
  // unique maximizer of a concave objective.
  Eigen::VectorXd f_warm = Eigen::VectorXd::Zero(n);
  const Objective objective = [&](const Eigen::VectorXd& theta,
                                  Eigen::VectorXd& grad) -> double {
    grad.setZero(theta.size());
    if (!theta.allFinite() ||
        theta.lpNorm<Eigen::Infinity>() > 25.0)  // exp() would overflow scales
      return std::numeric_limits<double>::infinity();
    try {
      const KernelHyperparams hp = unpack(theta);
      const Eigen::MatrixXd k = ard_gram(cls.x_, hp);
      const LaplaceState st = laplace_mode(k, cls.y_, f_warm, opts.max_newton);
      f_warm = st.f;
      grad = -log_z_gradient(cls.x_, k, hp, st).tail(d);
      return -st.log_z;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd theta0 = hp0.length_scales.array().log();

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
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += offset(gen);
    f_warm.setZero();
    const auto res = lbfgs_minimize(objective, theta, lopt);
    if (std::isfinite(res.fx) && res.fx < best_value) {
      best_value = res.fx;
      best_theta = res.x;
      have_best = true;
    }
  }
  if (!have_best) throw FitError("no classifier start produced a usable fit");

  cls.hp_ = unpack(best_theta);
  const Eigen::MatrixXd k = ard_gram(cls.x_, cls.hp_);
  const LaplaceState st =
      laplace_mode(k, cls.y_, Eigen::VectorXd::Zero(n), opts.max_newton);
  cls.log_marginal_ = st.log_z;
  cls.grad_loglik_ = st.grad_loglik;
  cls.sqrt_w_ = st.sqrt_w;
  cls.chol_b_ = st.chol_b;
  return cls;
}

Eigen::VectorXd GpClassifier::predict_prob(const Eigen::MatrixXd& queries) const {
  if (x_.size() == 0) throw PreconditionError("classifier is not fitted");
  if (queries.cols() != x_.cols())
    throw ShapeError("query dimensionality does not match the training data");
  if (!queries.allFinite())
    throw std::domain_error("queries contain non-finite values");

  const Eigen::MatrixXd q =
      (queries.rowwise() - x_mean_.transpose()).array().rowwise() /
      x_scale_.transpose().array();
  const Eigen::MatrixXd ks = gram_matrix(x_, q, KernelType::Ard, hp_);
  const Eigen::MatrixXd v =
      chol_b_.matrixL().solve(sqrt_w_.asDiagonal() * ks);

  Eigen::VectorXd out(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double mu = ks.col(i).dot(grad_loglik_);
    const double prior = hp_.signal_variance + 1e-8 * hp_.signal_variance;
    const double var = std::max(prior - v.col(i).squaredNorm(), 0.0);
    out(i) = std_normal_cdf(mu / std::sqrt(1.0 + var));
  }
  return out;
}

std::vector<std::pair<int, double>> GpClassifier::relevance_ranking() const {
  std::vector<std::pair<int, double>> out;
  out.reserve(hp_.length_scales.size());
  for (Eigen::Index i = 0; i < hp_.length_scales.size(); ++i)
    out.emplace_back(static_cast<int>(i), hp_.length_scales(i));
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

std::pair<double, Eigen::VectorXd> laplace_log_marginal(
    const Eigen::MatrixXd& x, const std::vector<int>& labels,
    const KernelHyperparams& hp) {
  hp.validate(static_cast<int>(x.cols()));
  if (x.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("features and labels have mismatched lengths");
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = labels[i] == 1 ? 1.0 : -1.0;
  const Eigen::MatrixXd k = ard_gram(x, hp);
  const LaplaceState st =
      laplace_mode(k, y, Eigen::VectorXd::Zero(x.rows()), 100);
  return {st.log_z, log_z_gradient(x, k, hp, st)};
}

std::vector<int> select_features(const Eigen::VectorXd& lengthscales,
                                 double threshold) {
  if (!std::isfinite(threshold) || threshold <= 0.0)
    throw std::domain_error("selection threshold must be positive and finite");
  if (!lengthscales.allFinite() || (lengthscales.array() <= 0.0).any())
    throw std::domain_error("length-scales must be positive and finite");

  std::vector<int> idx;
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i)
    if (lengthscales(i) < threshold) idx.push_back(static_cast<int>(i));
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return lengthscales(a) < lengthscales(b);
  });
  return idx;
}

}  // namespace gdcpd
