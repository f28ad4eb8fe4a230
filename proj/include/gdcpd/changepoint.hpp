#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gdcpd/gp_regression.hpp"

namespace gdcpd {

struct ChangePointResult {
  std::vector<int> indices;      // detected sample positions, ascending
  std::vector<double> timestamps;
  Eigen::VectorXd score;         // summed |derivative mean| per sample
  Eigen::VectorXd mean_diff;     // |D(k, A)| per window boundary (0 outside
                                 // the valid range and in suppressed zones)
  Eigen::MatrixXd attributions;  // per detection: |derivative mean| by feature
  bool truncated = false;        // ran out of unsuppressed candidates early
};

// Pooled derivative-magnitude score: row sums of |grad_means|.
Eigen::VectorXd derivative_score(const Eigen::MatrixXd& grad_means);

// Euclidean norm of the gap between the means of the two adjacent
// length-A windows that meet at boundary k: rows [k-A, k) against [k, k+A).
// Valid for A <= k <= rows - A.
double window_mean_difference(const Eigen::MatrixXd& x, int k, int window_a);

// Core detector: repeatedly take the highest unsuppressed score as a
// candidate, refine it to the boundary with the largest adjacent-window mean
// gap within +/-A, then suppress +/-A around the accepted location so later
// detections keep a pairwise separation greater than A.
ChangePointResult detect_from_scores(const Eigen::MatrixXd& grad_means,
                                     const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& timestamps,
                                     int k_count, int window_a);

struct DetectOptions {
  int k_count = 1;
  int window_a = 3;
  // Hyperparameters are fitted on at most this many (strided) points; the
  // posterior keeps at most support_subsample points. Derivative means are
  // always evaluated at every original timestamp.
  int hyper_subsample = 300;
  int support_subsample = 1500;
  GpFitOptions fit;
};

// Fits one GP per selected feature column, evaluates the derivative
// posterior means at the original timestamps, and runs the detector.
// grad_means_out, when given, receives the N x selected.size() derivative
// mean matrix so callers can derive monitoring weights without refitting.
ChangePointResult detect(const Eigen::VectorXd& timestamps,
                         const Eigen::MatrixXd& features,
                         const std::vector<int>& selected,
                         const DetectOptions& opts = {},
                         Eigen::MatrixXd* grad_means_out = nullptr);

}  // namespace gdcpd
