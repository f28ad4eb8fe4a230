#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "gdcpd/changepoint.hpp"
#include "gdcpd/dataset.hpp"
#include "gdcpd/gp_regression.hpp"
#include "gdcpd/lstm.hpp"
#include "gdcpd/wmd.hpp"

namespace gdcpd {

// Everything the two pipeline phases need, grouped the way the config file
// is. All fields have working defaults; a config file only overrides.
struct PipelineConfig {
  struct Data {
    double restart_exclusion = 1800.0;  // seconds masked after each break
    double cadence = 120.0;             // seconds between samples
    double prebreak_window = 3600.0;    // the critical pre-failure window
  } data;

  struct Features {
    double ard_threshold = 0.45;  // keep length-scales strictly below this
    int max_rows = 240;           // classifier subsample cap
  } features;

  struct Gdcpd {
    int k = 1;  // change points per pre-break window
    int window_a = 3;
    int hyper_subsample = 300;
    int support_subsample = 1500;
  } gdcpd;

  struct Monitor {
    int window_a = 3;  // 6 minutes at 2-minute cadence
  } monitor;

  struct Rul {
    int hidden = 16;
    int layers = 3;
    double dropout = 0.2;
    int epochs = 40;
    double learning_rate = 0.01;
    int calibration_epochs = 5;
    double calibration_lr_scale = 0.1;
    double floor = 600.0;  // stop predicting once RUL reaches this, seconds
  } rul;

  struct Seeds {
    std::uint64_t root = 0;  // every stage derives its own labeled substream
  } seeds;

  void validate() const;
  nlohmann::json to_json() const;
  // Rejects unknown keys at both the section and field level.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
};

// Sealed output of the offline phase: everything run_online needs to replay
// a stream, plus the diagnostic artifacts worth keeping.
struct ModelBundle {
  PipelineConfig config;
  std::vector<std::string> feature_names;  // columns after standardization
  StandardizationStats standardization;    // fitted on training rows only
  std::vector<int> selected_features;      // indices into feature_names
  Eigen::VectorXd ard_length_scales;       // one per retained column
  std::vector<GpRegressor> feature_gps;    // reference fits, one per selected
  std::vector<ChangePointResult> detections;  // one per training cycle
  MonitorConfig monitor;
  double mean_lead = 0.0;  // average alarm-to-break seconds on training data
  RulNetwork rul;

  nlohmann::json to_json() const;
  static ModelBundle from_json(const nlohmann::json& j);

  // Writes <dir>/bundle.json plus a manifest carrying a content hash; load
  // refuses a bundle whose hash does not match.
  void save(const std::string& dir) const;
  static ModelBundle load(const std::string& dir);
};

struct CycleOutcome {
  int cycle = 0;
  bool alarmed = false;
  double alarm_time = 0.0;  // when the crossing became observable
  double break_time = 0.0;
  double lead_seconds = 0.0;
  std::vector<double> wmd_times;  // one per emitted boundary statistic
  std::vector<double> wmd_values;
  std::vector<double> trace_times;  // alarm onward, until RUL hits the floor
  Eigen::VectorXd predictions;      // normalized RUL
  Eigen::VectorXd targets;          // normalized true RUL
  double rmse = 0.0;
  double score = 0.0;
};

struct OnlineReport {
  std::vector<CycleOutcome> cycles;
  int alarmed_cycles = 0;
  int total_points = 0;      // traced prediction points over all cycles
  double aggregate_rmse = 0.0;   // over the concatenated trace points
  double aggregate_score = 0.0;
};

struct EvaluationRow {
  int cycle = 0;
  bool alarmed = false;
  int points = 0;
  double rmse = 0.0;
  double score = 0.0;
  double lead_seconds = 0.0;
};

struct EvaluationSummary {
  std::vector<EvaluationRow> per_cycle;
  int total_cycles = 0;
  int alarmed_cycles = 0;
  int total_points = 0;
  double rmse = 0.0;   // recomputed over all traced points
  double score = 0.0;
};

// Rows for the relevance classifier: non-excluded rows inside the pre-break
// window of each cycle labeled 1, ordinary cycle rows labeled 0, each class
// thinned by striding to at most max_rows / 2.
std::pair<Eigen::MatrixXd, std::vector<int>> classification_rows(
    const TimeSeriesDataset& ds, double prebreak_window, int max_rows);

nlohmann::json monitor_to_json(const MonitorConfig& mc);
MonitorConfig monitor_from_json(const nlohmann::json& j);

// Training sequences for the remaining-life network: one per cycle whose
// boundary statistic crosses the bundle's threshold, ending at the crossing.
// The dataset must already carry the bundle's standardization. When `leads`
// is given it receives each crossing cycle's alarm-to-break seconds.
std::vector<Sequence> rul_sequences(const TimeSeriesDataset& standardized,
                                    const ModelBundle& bundle,
                                    std::vector<double>* leads = nullptr);

// Offline phase: standardize on the training rows, select features, detect
// change points per pre-break window, calibrate the monitor, train the RUL
// network on the windows preceding each first threshold crossing.
// Inputs are preprocessed (interpolated, masked) but not yet standardized.
ModelBundle run_offline(const TimeSeriesDataset& train,
                        const TimeSeriesDataset& validation,
                        const PipelineConfig& cfg);

// Prognostic phase: replay each test cycle through the monitor; on the first
// alarm, calibrate the RUL network on the preceding one-hour segment and
// predict each subsequent step until the remaining life reaches the floor.
OnlineReport run_online(const TimeSeriesDataset& test,
                        const ModelBundle& bundle);

// Recomputes per-cycle and aggregate RMSE / scoring-function values from the
// stored prediction traces.
EvaluationSummary evaluate(const OnlineReport& report);

// Emits report.txt, alarms.tsv and per-cycle trace/wmd column files.
void write_report(const OnlineReport& report, const std::string& out_dir);

}  // namespace gdcpd
