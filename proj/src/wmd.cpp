#include "gdcpd/wmd.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "gdcpd/errors.hpp"

namespace gdcpd {

namespace {

void check_quadratic_inputs(const Eigen::VectorXd& delta,
                            const Eigen::MatrixXd& cov_inv) {
  if (cov_inv.rows() != cov_inv.cols())
    throw ShapeError("precision matrix is not square");
  if (delta.size() != cov_inv.rows())
    throw ShapeError("delta length does not match the precision matrix");
  if (delta.size() == 0) throw PreconditionError("empty delta");
  if (!delta.allFinite() || !cov_inv.allFinite())
    throw std::domain_error("non-finite values in distance inputs");
}

}  // namespace

double mahalanobis(const Eigen::VectorXd& delta,
                   const Eigen::MatrixXd& cov_inv) {
  check_quadratic_inputs(delta, cov_inv);
  return std::sqrt(std::max(delta.dot(cov_inv * delta), 0.0));
}

double weighted_mahalanobis(const Eigen::VectorXd& delta,
                            const Eigen::VectorXd& weights,
                            const Eigen::MatrixXd& cov_inv) {
  if (weights.size() != delta.size())
    throw ShapeError("weights length does not match delta");
  if (!weights.allFinite())
    throw std::domain_error("non-finite weights");
  const Eigen::VectorXd v = weights.cwiseProduct(delta);
  return mahalanobis(v, cov_inv);
}

Eigen::VectorXd derivative_weights(const Eigen::MatrixXd& grad_means) {
  if (grad_means.size() == 0)
    throw PreconditionError("derivative_weights: empty derivative matrix");
  if (!grad_means.allFinite())
    throw std::domain_error("derivative_weights: non-finite derivatives");
  Eigen::VectorXd w = grad_means.array().abs().colwise().mean().transpose();
  const double total = w.sum();
  if (total <= 0.0)
    throw PreconditionError(
        "derivative_weights: all derivative magnitudes are zero");
  return w / total;
}

Eigen::MatrixXd estimate_cov_inv(const Eigen::MatrixXd& x, double ridge) {
  if (x.rows() < 2)
    throw PreconditionError("estimate_cov_inv: need at least 2 rows");
  if (!x.allFinite())
    throw std::domain_error("estimate_cov_inv: non-finite data");
  if (ridge < 0.0)
    throw PreconditionError("estimate_cov_inv: negative ridge");

  const Eigen::Index d = x.cols();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  cov.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success ||
      llt.matrixLLT().diagonal().minCoeff() < 1e-10)
    throw NumericalError(
        "estimate_cov_inv: covariance is numerically rank deficient; "
        "increase the ridge");
  return llt.solve(Eigen::MatrixXd::Identity(d, d));
}

void MonitorConfig::validate() const {
  if (window_a < 1)
    throw PreconditionError("monitor window must be >= 1");
  if (weights.size() == 0)
    throw PreconditionError("monitor weights are empty");
  if (!weights.allFinite() || weights.minCoeff() < 0.0)
    throw std::domain_error("monitor weights must be finite and nonnegative");
  if (weights.sum() <= 0.0)
    throw PreconditionError("monitor weights sum to zero");
  if (cov_inv.rows() != weights.size() || cov_inv.cols() != weights.size())
    throw ShapeError("monitor precision matrix does not match the weights");
  if (!cov_inv.allFinite())
    throw std::domain_error("monitor precision matrix has non-finite values");
  if (!std::isfinite(threshold_b) || threshold_b < 0.0)
    throw PreconditionError("monitor threshold must be finite and >= 0");
}

namespace {

// Row-by-row accumulation keeps the addition order independent of the
// enclosing matrix's layout, so the offline series and the online replay
// run the exact same floating-point operations.
Eigen::RowVectorXd window_mean(const Eigen::MatrixXd& x, int start, int len) {
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(x.cols());
  for (int i = 0; i < len; ++i) m += x.row(start + i);
  return m / static_cast<double>(len);
}

double boundary_statistic(const Eigen::MatrixXd& x, int k,
                          const MonitorConfig& cfg,
                          Eigen::VectorXd* contributions) {
  const int a = cfg.window_a;
  const Eigen::RowVectorXd left = window_mean(x, k - a, a);
  const Eigen::RowVectorXd right = window_mean(x, k, a);
  const Eigen::VectorXd delta = (right - left).transpose();
  if (contributions != nullptr)
    *contributions = cfg.weights.cwiseProduct(delta).cwiseAbs();
  return weighted_mahalanobis(delta, cfg.weights, cfg.cov_inv);
}

}  // namespace

Eigen::VectorXd wmd_series(const Eigen::MatrixXd& x,
                           const MonitorConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(x.rows());
  const int a = cfg.window_a;
  if (x.cols() != cfg.weights.size())
    throw ShapeError("data width does not match the monitor weights");
  if (n < 2 * a)
    throw PreconditionError("series shorter than two monitor windows");

  Eigen::VectorXd out(n - 2 * a + 1);
  for (int k = a; k <= n - a; ++k)
    out(k - a) = boundary_statistic(x, k, cfg, nullptr);
  return out;
}

double offline_threshold(const std::vector<Eigen::MatrixXd>& segments,
                         const MonitorConfig& cfg) {
  if (segments.empty())
    throw PreconditionError("offline_threshold: no segments");
  double total = 0.0;
  for (const Eigen::MatrixXd& seg : segments)
    total += wmd_series(seg, cfg).maxCoeff();
  return total / static_cast<double>(segments.size());
}

std::optional<int> stopping_time(const Eigen::VectorXd& series,
                                 double threshold) {
  for (Eigen::Index i = 0; i < series.size(); ++i)
    if (series(i) >= threshold) return static_cast<int>(i);
  return std::nullopt;
}

OnlineMonitor::OnlineMonitor(MonitorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  contributions_ = Eigen::VectorXd::Zero(cfg_.weights.size());
}

std::optional<double> OnlineMonitor::push(const Eigen::VectorXd& sample) {
  if (sample.size() != cfg_.weights.size())
    throw ShapeError("pushed sample width does not match the monitor");
  if (!sample.allFinite())
    throw std::domain_error("pushed sample has non-finite values");

  buffer_.push_back(sample);
  const size_t capacity = static_cast<size_t>(2 * cfg_.window_a);
  if (buffer_.size() > capacity) buffer_.pop_front();
  ++count_;
  if (buffer_.size() < capacity) return std::nullopt;

  // Materialize the window in arrival order; the arithmetic then matches
  // the offline series exactly.
  Eigen::MatrixXd window(static_cast<Eigen::Index>(capacity),
                         cfg_.weights.size());
  for (size_t i = 0; i < capacity; ++i)
    window.row(static_cast<Eigen::Index>(i)) = buffer_[i].transpose();

  const double value =
      boundary_statistic(window, cfg_.window_a, cfg_, &contributions_);
  running_max_ = std::max(running_max_, value);
  if (!first_alarm_ && value >= cfg_.threshold_b)
    first_alarm_ = count_ - cfg_.window_a;
  return value;
}

}  // namespace gdcpd
