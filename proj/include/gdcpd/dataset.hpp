#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gdcpd {

// Raw and preprocessed sensor data. Missing cells are held as NaN between
// loading and preprocessing; a finished dataset has none.
struct TimeSeriesDataset {
  Eigen::VectorXd timestamps;  // seconds, strictly increasing
  Eigen::MatrixXd features;    // N x D
  std::vector<std::string> feature_names;
  std::vector<int> labels;  // break indicator per row; empty without a y column
  std::vector<std::uint8_t> exclusion_mask;  // 1 = post-restart row, sized by preprocess
  std::vector<std::pair<double, double>> standardization;  // (mean, std) per column
  int reorder_count = 0;  // out-of-order rows fixed while loading

  Eigen::Index rows() const { return timestamps.size(); }
  Eigen::Index cols() const { return features.cols(); }
  bool has_labels() const { return !labels.empty(); }
  bool is_excluded(Eigen::Index row) const {
    return !exclusion_mask.empty() &&
           exclusion_mask[static_cast<std::size_t>(row)] != 0;
  }

  // Inclusive [start, break-row] index ranges, one per breakdown cycle.
  // Rows after the final break belong to no cycle.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cycle_ranges() const;

  // Copies rows [begin, end); column metadata carries over.
  TimeSeriesDataset slice(Eigen::Index begin, Eigen::Index end) const;
};

struct PreprocessConfig {
  double restart_exclusion = 1800.0;  // seconds masked after each break
  bool interpolate = true;
  bool standardize = false;  // pipelines standardize after splitting instead
};

struct PreprocessReport {
  int interpolated_cells = 0;  // interior gaps, linear in time
  int edge_filled_cells = 0;   // leading/trailing gaps, nearest value
  int excluded_rows = 0;
  std::vector<int> dropped_features;  // original column indices
  std::vector<std::string> dropped_names;
};

// Per-column statistics fitted on the non-excluded rows of one dataset and
// applied to others, so held-out rows never leak into the location/scale.
struct StandardizationStats {
  std::vector<double> mean, stddev;  // sized by the source dataset's columns
  std::vector<int> kept;             // columns with usable variance
};

struct SplitResult {
  TimeSeriesDataset train, validation, test;
};

TimeSeriesDataset load_csv(const std::string& path);
void save_csv(const TimeSeriesDataset& ds, const std::string& path);

PreprocessReport preprocess(TimeSeriesDataset& ds,
                            const PreprocessConfig& cfg = {});

StandardizationStats fit_standardization(const TimeSeriesDataset& ds);
void apply_standardization(TimeSeriesDataset& ds,
                           const StandardizationStats& stats);

// Chronological 60/20/20 split by breakdown-cycle count, never mid-cycle.
// Rows trailing the final break stay with the test portion.
SplitResult split_cycles(const TimeSeriesDataset& ds);

}  // namespace gdcpd
