#pragma once

#include <Eigen/Dense>
#include <deque>
#include <optional>
#include <vector>

namespace gdcpd {

double mahalanobis(const Eigen::VectorXd& delta,
                   const Eigen::MatrixXd& cov_inv);

// Weighted variant: the per-feature weights scale delta before the
// Mahalanobis form, so sqrt(delta' W Sigma^{-1} W delta) with W diagonal.
double weighted_mahalanobis(const Eigen::VectorXd& delta,
                            const Eigen::VectorXd& weights,
                            const Eigen::MatrixXd& cov_inv);

// Mean absolute derivative per feature, normalized to sum to one.
Eigen::VectorXd derivative_weights(const Eigen::MatrixXd& grad_means);

// Inverse of the ridge-stabilized sample covariance of the rows of x.
Eigen::MatrixXd estimate_cov_inv(const Eigen::MatrixXd& x,
                                 double ridge = 1e-3);

struct MonitorConfig {
  int window_a = 3;
  Eigen::VectorXd weights;
  Eigen::MatrixXd cov_inv;
  double threshold_b = 0.0;

  void validate() const;
};

// Boundary statistic at every k in [A, N-A]: the weighted Mahalanobis
// distance between the mean of rows [k-A, k) and the mean of rows [k, k+A).
// Entry i of the result corresponds to boundary k = A + i.
Eigen::VectorXd wmd_series(const Eigen::MatrixXd& x,
                           const MonitorConfig& cfg);

// Mean over segments of each segment's largest boundary statistic.
double offline_threshold(const std::vector<Eigen::MatrixXd>& segments,
                         const MonitorConfig& cfg);

// First index whose value reaches the threshold (equivalently, where the
// running maximum first touches it); equality already counts.
std::optional<int> stopping_time(const Eigen::VectorXd& series,
                                 double threshold);

// Streaming replay of the offline statistic: after the (2A)-th sample each
// push emits the statistic at boundary k = samples_seen - A, reproducing
// wmd_series entry by entry, bit for bit.
class OnlineMonitor {
 public:
  explicit OnlineMonitor(MonitorConfig cfg);

  std::optional<double> push(const Eigen::VectorXd& sample);

  // Boundary index of the first statistic at or above the threshold.
  std::optional<int> first_alarm() const { return first_alarm_; }
  int samples_seen() const { return count_; }
  double running_max() const { return running_max_; }
  // |w .* delta| at the most recent emission.
  const Eigen::VectorXd& contributions() const { return contributions_; }

 private:
  MonitorConfig cfg_;
  std::deque<Eigen::VectorXd> buffer_;
  int count_ = 0;
  double running_max_ = 0.0;
  std::optional<int> first_alarm_;
  Eigen::VectorXd contributions_;
};

}  // namespace gdcpd
