#include "gdcpd/changepoint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gdcpd/errors.hpp"

namespace gdcpd {

Eigen::VectorXd derivative_score(const Eigen::MatrixXd& grad_means) {
  if (grad_means.size() == 0) {
    throw PreconditionError("derivative_score: empty derivative matrix");
  }
  return grad_means.array().abs().rowwise().sum();
}

double window_mean_difference(const Eigen::MatrixXd& x, int k, int window_a) {
  const int n = static_cast<int>(x.rows());
  if (window_a < 1) {
    throw PreconditionError("window_mean_difference: window must be >= 1");
  }
  if (k < window_a || k > n - window_a) {
    throw PreconditionError("window_mean_difference: boundary out of range");
  }
  const Eigen::RowVectorXd left =
      x.middleRows(k - window_a, window_a).colwise().mean();
  const Eigen::RowVectorXd right =
      x.middleRows(k, window_a).colwise().mean();
  return (right - left).norm();
}

namespace {

// Largest-gap boundary within +/-A of the candidate, restricted to the
// valid boundary range. Ties go to the lowest index.
// Refinement only considers unsuppressed boundaries: letting it drift back
// into an earlier detection's zone would break the pairwise-separation
// contract. Returns -1 when no usable boundary is left near the candidate
// (a spike at the very edge whose whole window is already taken).
int refine_candidate(const Eigen::MatrixXd& x, int candidate, int window_a,
                     const std::vector<bool>& suppressed) {
  const int n = static_cast<int>(x.rows());
  const int lo = std::max(window_a, candidate - window_a);
  const int hi = std::min(n - window_a, candidate + window_a);
  int best_k = -1;
  double best_gap = -1.0;
  for (int k = lo; k <= hi; ++k) {
    if (suppressed[static_cast<size_t>(k)]) continue;
    const double gap = window_mean_difference(x, k, window_a);
    if (gap > best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace

ChangePointResult detect_from_scores(const Eigen::MatrixXd& grad_means,
                                     const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& timestamps,
                                     int k_count, int window_a) {
  const int n = static_cast<int>(x.rows());
  if (grad_means.rows() != n || timestamps.size() != n) {
    throw ShapeError("detect_from_scores: row counts disagree");
  }
  if (k_count < 1) {
    throw PreconditionError("detect_from_scores: need k_count >= 1");
  }
  if (window_a < 1 || n < 2 * window_a) {
    throw PreconditionError(
        "detect_from_scores: series shorter than two windows");
  }

  ChangePointResult result;
  result.score = derivative_score(grad_means);
  result.mean_diff = Eigen::VectorXd::Zero(n);

  std::vector<bool> suppressed(static_cast<size_t>(n), false);
  std::vector<std::pair<int, Eigen::VectorXd>> found;  // (index, attribution)

  while (static_cast<int>(found.size()) < k_count) {
    // Highest unsuppressed score; ties resolve to the lowest index.
    int candidate = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!suppressed[static_cast<size_t>(i)] && result.score(i) > best) {
        best = result.score(i);
        candidate = i;
      }
    }
    if (candidate < 0) {
      result.truncated = true;
      break;
    }

    const int k = refine_candidate(x, candidate, window_a, suppressed);
    if (k < 0) {
      // An edge spike with no usable boundary left; retire it and move on.
      suppressed[static_cast<size_t>(candidate)] = true;
      continue;
    }
    result.mean_diff(k) = window_mean_difference(x, k, window_a);
    found.emplace_back(
        k, grad_means.row(std::min(k, n - 1)).cwiseAbs().transpose());

    for (int i = std::max(0, k - window_a);
         i <= std::min(n - 1, k + window_a); ++i) {
      suppressed[static_cast<size_t>(i)] = true;
    }
  }

  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  result.attributions.resize(static_cast<Eigen::Index>(found.size()),
                             grad_means.cols());
  for (size_t i = 0; i < found.size(); ++i) {
    result.indices.push_back(found[i].first);
    result.timestamps.push_back(timestamps(found[i].first));
    result.attributions.row(static_cast<Eigen::Index>(i)) =
        found[i].second.transpose();
  }
  return result;
}

namespace {

// Evenly strided row subset of at most `cap` points, always keeping the
// first and last sample so the fitted process spans the full range.
std::vector<int> strided_subset(int n, int cap) {
  std::vector<int> idx;
  if (cap >= n) {
    idx.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    return idx;
  }
  idx.reserve(static_cast<size_t>(cap));
  const double step = static_cast<double>(n - 1) / (cap - 1);
  int prev = -1;
  for (int j = 0; j < cap; ++j) {
    int i = static_cast<int>(std::lround(j * step));
    i = std::min(i, n - 1);
    if (i != prev) idx.push_back(i);
    prev = i;
  }
  return idx;
}

}  // namespace

ChangePointResult detect(const Eigen::VectorXd& timestamps,
                         const Eigen::MatrixXd& features,
                         const std::vector<int>& selected,
                         const DetectOptions& opts,
                         Eigen::MatrixXd* grad_means_out) {
  const int n = static_cast<int>(timestamps.size());
  if (features.rows() != n) {
    throw ShapeError("detect: timestamps and features disagree");
  }
  if (selected.empty()) {
    throw PreconditionError("detect: no features selected");
  }
  for (int c : selected) {
    if (c < 0 || c >= features.cols()) {
      throw PreconditionError("detect: selected column out of range");
    }
  }
  if (n < 2 * opts.window_a || n < 4) {
    throw PreconditionError("detect: series shorter than two windows");
  }

  const std::vector<int> hyper_idx = strided_subset(n, opts.hyper_subsample);
  const std::vector<int> support_idx =
      strided_subset(n, opts.support_subsample);

  auto gather = [&](const std::vector<int>& rows, const Eigen::VectorXd& col) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) out(i) = col(rows[i]);
    return out;
  };
  const Eigen::VectorXd t_hyper = gather(hyper_idx, timestamps);
  const Eigen::VectorXd t_support = gather(support_idx, timestamps);

  Eigen::MatrixXd grad_means(n, static_cast<Eigen::Index>(selected.size()));
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(selected.size()));

  const double span = timestamps(n - 1) - timestamps(0);
  for (size_t j = 0; j < selected.size(); ++j) {
    const Eigen::VectorXd col = features.col(selected[j]);
    x.col(static_cast<Eigen::Index>(j)) = col;

    KernelHyperparams init;
    init.signal_variance = 1.0;
    init.length_scales = Eigen::VectorXd::Constant(1, span / 10.0);
    init.noise_variance = 0.1;

    const GpRegressor gp =
        GpRegressor::fit(t_hyper, gather(hyper_idx, col), init, opts.fit);

    // Refit the posterior on the denser support set with the tuned
    // hyperparameters, then evaluate everywhere.
    GpRegressor dense = GpRegressor::with_params(
        t_support, gather(support_idx, col), gp.params());
    const DerivativePosterior post = dense.derivative_posterior(timestamps);
    grad_means.col(static_cast<Eigen::Index>(j)) = post.mean;
  }

  if (grad_means_out != nullptr) *grad_means_out = grad_means;
  return detect_from_scores(grad_means, x, timestamps, opts.k_count,
                            opts.window_a);
}

}  // namespace gdcpd
