#include "gdcpd/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gdcpd/changepoint.hpp"
#include "gdcpd/dataset.hpp"
#include "gdcpd/errors.hpp"
#include "gdcpd/gp_classification.hpp"
#include "gdcpd/lstm.hpp"
#include "gdcpd/mjd.hpp"
#include "gdcpd/pipeline.hpp"
#include "gdcpd/rng.hpp"
#include "gdcpd/wmd.hpp"

namespace gdcpd {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return PipelineConfig::load(path);
}

TimeSeriesDataset load_input(const std::string& path,
                             const PipelineConfig& cfg) {
  TimeSeriesDataset ds = load_csv(path);
  PreprocessConfig pc;
  pc.restart_exclusion = cfg.data.restart_exclusion;
  preprocess(ds, pc);
  return ds;
}

// The standalone stage tools standardize each file on itself; the bundle
// flow (run-offline / run-online) instead carries training statistics
// across files.
void self_standardize(TimeSeriesDataset& ds) {
  apply_standardization(ds, fit_standardization(ds));
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
  return j;
}

// Rows of a tab-separated numeric file, header line skipped.
std::vector<std::vector<double>> read_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, '\t')) {
      char* end = nullptr;
      row.push_back(std::strtod(cell.c_str(), &end));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Included rows of each cycle as (times, features); unlabeled data counts
// as one open-ended cycle.
struct StreamView {
  Eigen::VectorXd times;
  Eigen::MatrixXd features;
  double break_time = 0.0;
  bool has_break = false;
};

std::vector<StreamView> stream_views(const TimeSeriesDataset& ds) {
  std::vector<StreamView> out;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  if (ds.has_labels())
    ranges = ds.cycle_ranges();
  else if (ds.rows() > 0)
    ranges.push_back({0, ds.rows() - 1});
  for (const auto& range : ranges) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = range.first; r <= range.second; ++r)
      if (!ds.is_excluded(r)) rows.push_back(r);
    if (rows.empty()) continue;
    StreamView v;
    v.times.resize(static_cast<Eigen::Index>(rows.size()));
    v.features.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      v.times(static_cast<Eigen::Index>(i)) = ds.timestamps(rows[i]);
      v.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
    }
    v.has_break = ds.has_labels();
    v.break_time = ds.timestamps(range.second);
    out.push_back(std::move(v));
  }
  return out;
}

struct SharedFlags {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int window = 0;
  int k = 0;
  double threshold = 0.0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* window_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
};

void add_shared(CLI::App* sub, SharedFlags& f, bool with_data = true) {
  sub->add_option("--config", f.config_path, "configuration file (json)");
  if (with_data)
    sub->add_option("--data", f.data_path, "input csv (time,y,x1,...)")
        ->required();
  f.seed_opt = sub->add_option("--seed", f.seed, "override the root seed");
  f.window_opt =
      sub->add_option("--window", f.window, "window half-width in samples");
  f.k_opt = sub->add_option("--k", f.k, "change points per window");
  f.threshold_opt =
      sub->add_option("--threshold", f.threshold, "override the threshold");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{
      "change-point driven early-warning and remaining-life toolkit"};
  app.require_subcommand(1);

  // simulate ----------------------------------------------------------------
  auto* sim = app.add_subcommand(
      "simulate", "generate a benchmark jump-diffusion path as csv");
  std::string scenario_name;
  SharedFlags sim_f;
  sim->add_option("--scenario", scenario_name, "benchmark scenario name")
      ->required();
  add_shared(sim, sim_f, false);
  sim->add_option("--out", sim_f.out_dir, "output directory")->required();
  sim->callback([&] {
    const auto suite = scenario_suite();
    const Scenario* sc = nullptr;
    std::string names;
    for (const auto& s : suite) {
      if (!names.empty()) names += ", ";
      names += s.name;
      if (s.name == scenario_name) sc = &s;
    }
    if (sc == nullptr)
      throw PreconditionError("unknown scenario '" + scenario_name +
                              "'; available: " + names);
    const std::uint64_t seed = *sim_f.seed_opt ? sim_f.seed : 0;
    const MjdPath path = simulate_scenario(*sc, seed);

    TimeSeriesDataset ds;
    ds.timestamps = path.times;
    ds.features = path.values;
    ds.feature_names = {"x1"};
    fs::create_directories(sim_f.out_dir);
    save_csv(ds, (fs::path(sim_f.out_dir) / "path.csv").string());

    json truth;
    truth["scenario"] = sc->name;
    truth["seed"] = seed;
    truth["ground_truth"] = sc->ground_truth;
    truth["window_a"] = sc->window_a;
    truth["dt"] = sc->dt;
    truth["jump_times"] = path.jump_times;
    write_json_file(truth, fs::path(sim_f.out_dir) / "truth.json");

    out << "scenario " << sc->name << ": " << path.times.size()
        << " samples, dt " << fmt(sc->dt) << ", "
        << sc->ground_truth.size() << " ground-truth change point(s)\n";
  });

  // select-features ---------------------------------------------------------
  auto* sel = app.add_subcommand(
      "select-features",
      "rank features by ARD relevance on pre-break vs ordinary rows");
  SharedFlags sel_f;
  add_shared(sel, sel_f);
  sel->add_option("--out", sel_f.out_dir, "output directory");
  sel->callback([&] {
    PipelineConfig cfg = load_config(sel_f.config_path);
    if (*sel_f.seed_opt) cfg.seeds.root = sel_f.seed;
    if (*sel_f.threshold_opt) cfg.features.ard_threshold = sel_f.threshold;
    cfg.validate();

    TimeSeriesDataset ds = load_input(sel_f.data_path, cfg);
    self_standardize(ds);
    const auto [x, labels] = classification_rows(ds, cfg.data.prebreak_window,
                                                 cfg.features.max_rows);
    KernelHyperparams init;
    init.signal_variance = 1.0;
    init.length_scales = Eigen::VectorXd::Ones(ds.cols());
    init.noise_variance = 0.0;
    GpClassifierOptions copts;
    copts.seed = substream_seed(cfg.seeds.root, "classify");
    const GpClassifier clf = GpClassifier::fit_laplace(x, labels, init, copts);
    const std::vector<int> selected =
        select_features(clf.lengthscales(), cfg.features.ard_threshold);

    out << "kept " << selected.size() << " of " << ds.cols()
        << " features at threshold " << fmt(cfg.features.ard_threshold)
        << "\n";
    for (const auto& [idx, scale] : clf.relevance_ranking()) {
      const bool kept = scale < cfg.features.ard_threshold;
      out << "  " << ds.feature_names[static_cast<std::size_t>(idx)]
          << "  length-scale " << fmt(scale) << (kept ? "  [kept]" : "")
          << "\n";
    }
    if (!sel_f.out_dir.empty()) {
      fs::create_directories(sel_f.out_dir);
      json j;
      j["threshold"] = cfg.features.ard_threshold;
      j["feature_names"] = ds.feature_names;
      json ls = json::array();
      for (Eigen::Index i = 0; i < clf.lengthscales().size(); ++i)
        ls.push_back(clf.lengthscales()(i));
      j["length_scales"] = std::move(ls);
      j["selected"] = selected;
      write_json_file(j, fs::path(sel_f.out_dir) / "features.json");
    }
  });

  // detect ------------------------------------------------------------------
  auto* det = app.add_subcommand(
      "detect", "locate change points in the derivative of each feature");
  SharedFlags det_f;
  add_shared(det, det_f);
  det->add_option("--out", det_f.out_dir, "output directory");
  det->callback([&] {
    PipelineConfig cfg = load_config(det_f.config_path);
    if (*det_f.seed_opt) cfg.seeds.root = det_f.seed;
    if (*det_f.window_opt) cfg.gdcpd.window_a = det_f.window;
    if (*det_f.k_opt) cfg.gdcpd.k = det_f.k;
    cfg.validate();

    TimeSeriesDataset ds = load_input(det_f.data_path, cfg);
    self_standardize(ds);
    const auto views = stream_views(ds);
    if (views.empty()) throw PreconditionError("no usable rows to scan");
    // Labeled input: scan the most recent pre-break window; otherwise the
    // whole stream.
    const StreamView& v = views.back();
    Eigen::Index lo = 0;
    if (v.has_break) {
      lo = v.times.size();
      while (lo > 0 &&
             v.times(lo - 1) > v.break_time - cfg.data.prebreak_window)
        --lo;
    }
    const Eigen::Index n = v.times.size() - lo;
    if (n < std::max<Eigen::Index>(2 * cfg.gdcpd.window_a, 4))
      throw PreconditionError("too few rows in the scan window");

    std::vector<int> all(static_cast<std::size_t>(ds.cols()));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    DetectOptions dopts;
    dopts.k_count = cfg.gdcpd.k;
    dopts.window_a = cfg.gdcpd.window_a;
    dopts.hyper_subsample = cfg.gdcpd.hyper_subsample;
    dopts.support_subsample = cfg.gdcpd.support_subsample;
    dopts.fit.seed = substream_seed(cfg.seeds.root, "detect");
    const ChangePointResult res =
        detect(v.times.segment(lo, n), v.features.middleRows(lo, n), all,
               dopts);

    if (res.indices.empty()) {
      out << "no change point found\n";
    } else {
      for (std::size_t i = 0; i < res.indices.size(); ++i)
        out << "change point at t=" << fmt(res.timestamps[i]) << " (index "
            << res.indices[i] << " of the scan window)\n";
      if (res.truncated) out << "note: ran out of candidates early\n";
    }
    if (!det_f.out_dir.empty()) {
      fs::create_directories(det_f.out_dir);
      json j;
      j["indices"] = res.indices;
      j["timestamps"] = res.timestamps;
      j["truncated"] = res.truncated;
      j["window_a"] = cfg.gdcpd.window_a;
      write_json_file(j, fs::path(det_f.out_dir) / "detections.json");
    }
  });

  // calibrate-threshold -------------------------------------------------------
  auto* cal = app.add_subcommand(
      "calibrate-threshold",
      "fit a uniform-weight monitor and its alarm threshold from labeled "
      "cycles");
  SharedFlags cal_f;
  add_shared(cal, cal_f);
  cal->add_option("--out", cal_f.out_dir, "output directory")->required();
  cal->callback([&] {
    PipelineConfig cfg = load_config(cal_f.config_path);
    if (*cal_f.window_opt) cfg.monitor.window_a = cal_f.window;
    cfg.validate();

    TimeSeriesDataset ds = load_input(cal_f.data_path, cfg);
    if (!ds.has_labels())
      throw PreconditionError("threshold calibration needs labeled cycles");
    self_standardize(ds);

    std::vector<Eigen::MatrixXd> segments;
    std::vector<Eigen::Index> healthy_rows;
    for (const auto& range : ds.cycle_ranges()) {
      const double t_break = ds.timestamps(range.second);
      std::vector<Eigen::Index> pre;
      for (Eigen::Index r = range.first; r <= range.second; ++r) {
        if (ds.is_excluded(r)) continue;
        if (ds.timestamps(r) > t_break - cfg.data.prebreak_window)
          pre.push_back(r);
        else
          healthy_rows.push_back(r);
      }
      if (pre.size() >= static_cast<std::size_t>(2 * cfg.monitor.window_a)) {
        Eigen::MatrixXd seg(static_cast<Eigen::Index>(pre.size()), ds.cols());
        for (std::size_t i = 0; i < pre.size(); ++i)
          seg.row(static_cast<Eigen::Index>(i)) = ds.features.row(pre[i]);
        segments.push_back(std::move(seg));
      }
    }
    if (segments.empty())
      throw PreconditionError("no pre-break segment is long enough");
    if (healthy_rows.size() < static_cast<std::size_t>(ds.cols()) + 2)
      throw PreconditionError("too few ordinary rows for a covariance");
    Eigen::MatrixXd healthy(static_cast<Eigen::Index>(healthy_rows.size()),
                            ds.cols());
    for (std::size_t i = 0; i < healthy_rows.size(); ++i)
      healthy.row(static_cast<Eigen::Index>(i)) =
          ds.features.row(healthy_rows[i]);

    MonitorConfig mc;
    mc.window_a = cfg.monitor.window_a;
    mc.weights =
        Eigen::VectorXd::Constant(ds.cols(), 1.0 / static_cast<double>(ds.cols()));
    mc.cov_inv = estimate_cov_inv(healthy);
    mc.threshold_b = offline_threshold(segments, mc);
    mc.validate();

    fs::create_directories(cal_f.out_dir);
    write_json_file(monitor_to_json(mc),
                    fs::path(cal_f.out_dir) / "monitor.json");
    out << "threshold " << fmt(mc.threshold_b) << " from " << segments.size()
        << " pre-break segment(s), window half-width " << mc.window_a << "\n";
  });

  // monitor -------------------------------------------------------------------
  auto* mon = app.add_subcommand(
      "monitor", "replay a stream through a calibrated monitor");
  SharedFlags mon_f;
  std::string monitor_path;
  add_shared(mon, mon_f);
  mon->add_option("--monitor", monitor_path,
                  "monitor.json from calibrate-threshold")
      ->required();
  mon->add_option("--out", mon_f.out_dir, "output directory");
  mon->callback([&] {
    PipelineConfig cfg = load_config(mon_f.config_path);
    MonitorConfig mc = monitor_from_json(read_json_file(monitor_path));
    if (*mon_f.threshold_opt) {
      mc.threshold_b = mon_f.threshold;
      mc.validate();
    }

    TimeSeriesDataset ds = load_input(mon_f.data_path, cfg);
    self_standardize(ds);
    if (ds.cols() != mc.weights.size())
      throw ShapeError("stream has " + std::to_string(ds.cols()) +
                       " features but the monitor expects " +
                       std::to_string(mc.weights.size()));

    if (!mon_f.out_dir.empty()) fs::create_directories(mon_f.out_dir);
    const auto views = stream_views(ds);
    int cycle = 0;
    for (const auto& v : views) {
      OnlineMonitor monitor(mc);
      std::vector<double> times, values;
      Eigen::Index alarm_pos = -1;
      for (Eigen::Index i = 0; i < v.times.size(); ++i) {
        const auto value = monitor.push(v.features.row(i).transpose());
        if (value) {
          times.push_back(v.times(i));
          values.push_back(*value);
        }
        if (alarm_pos < 0 && monitor.first_alarm()) alarm_pos = i;
      }
      if (alarm_pos >= 0) {
        out << "cycle " << cycle << ": alarm at t=" << fmt(v.times(alarm_pos));
        if (v.has_break)
          out << " (" << fmt(v.break_time - v.times(alarm_pos))
              << " s before the break)";
        out << "\n";
      } else {
        out << "cycle " << cycle << ": no alarm\n";
      }
      if (!mon_f.out_dir.empty()) {
        std::ofstream tsv(fs::path(mon_f.out_dir) /
                          ("wmd_" + std::to_string(cycle) + ".tsv"));
        tsv << "time\twmd\n";
        for (std::size_t i = 0; i < values.size(); ++i)
          tsv << fmt_full(times[i]) << '\t' << fmt_full(values[i]) << '\n';
      }
      ++cycle;
    }
  });

  // train-rul -----------------------------------------------------------------
  auto* tr = app.add_subcommand(
      "train-rul",
      "retrain the remaining-life network of an existing bundle");
  SharedFlags tr_f;
  std::string tr_bundle;
  add_shared(tr, tr_f);
  tr->add_option("--bundle", tr_bundle, "bundle directory")->required();
  tr->add_option("--out", tr_f.out_dir, "output bundle directory")->required();
  tr->callback([&] {
    ModelBundle bundle = ModelBundle::load(tr_bundle);
    if (!tr_f.config_path.empty())
      bundle.config.rul = PipelineConfig::load(tr_f.config_path).rul;
    if (*tr_f.seed_opt) bundle.config.seeds.root = tr_f.seed;
    bundle.config.validate();

    TimeSeriesDataset ds = load_input(tr_f.data_path, bundle.config);
    apply_standardization(ds, bundle.standardization);
    if (ds.feature_names != bundle.feature_names)
      throw PreconditionError("data columns do not match the bundle");

    std::vector<double> leads;
    std::vector<Sequence> seqs = rul_sequences(ds, bundle, &leads);
    if (seqs.size() < 2)
      throw FitError("need at least two crossing cycles to retrain");
    const std::size_t n_val = std::max<std::size_t>(1, seqs.size() / 5);
    std::vector<Sequence> val_seqs(seqs.end() - static_cast<long>(n_val),
                                   seqs.end());
    seqs.resize(seqs.size() - n_val);

    const auto& rc = bundle.config.rul;
    bundle.rul = RulNetwork(
        static_cast<int>(bundle.selected_features.size()) + 2, rc.hidden,
        rc.layers, rc.dropout,
        substream_seed(bundle.config.seeds.root, "rul-init"));
    TrainOptions topts;
    topts.epochs = rc.epochs;
    topts.learning_rate = rc.learning_rate;
    topts.seed = substream_seed(bundle.config.seeds.root, "rul-train");
    const TrainReport report = bundle.rul.train(seqs, val_seqs, topts);
    bundle.mean_lead = 0.0;
    for (double lead : leads) bundle.mean_lead += lead;
    bundle.mean_lead /= static_cast<double>(leads.size());

    bundle.save(tr_f.out_dir);
    out << "retrained on " << seqs.size() << " sequence(s), validated on "
        << val_seqs.size() << "; best epoch " << report.best_epoch
        << ", validation loss " << fmt(report.best_val_loss) << "\n";
  });

  // run-offline -----------------------------------------------------------------
  auto* off = app.add_subcommand(
      "run-offline",
      "split the data and build the full diagnostic-phase bundle");
  SharedFlags off_f;
  add_shared(off, off_f);
  off->add_option("--out", off_f.out_dir, "output directory")->required();
  off->callback([&] {
    PipelineConfig cfg = load_config(off_f.config_path);
    if (*off_f.seed_opt) cfg.seeds.root = off_f.seed;
    if (*off_f.window_opt) {
      cfg.gdcpd.window_a = off_f.window;
      cfg.monitor.window_a = off_f.window;
    }
    if (*off_f.k_opt) cfg.gdcpd.k = off_f.k;
    if (*off_f.threshold_opt) cfg.features.ard_threshold = off_f.threshold;
    cfg.validate();

    TimeSeriesDataset ds = load_input(off_f.data_path, cfg);
    const SplitResult split = split_cycles(ds);
    out << "split: " << split.train.rows() << " train rows, "
        << split.validation.rows() << " validation rows, "
        << split.test.rows() << " test rows\n";

    const ModelBundle bundle = run_offline(split.train, split.validation, cfg);
    fs::create_directories(off_f.out_dir);
    bundle.save((fs::path(off_f.out_dir) / "bundle").string());
    save_csv(split.test, (fs::path(off_f.out_dir) / "test.csv").string());

    out << "selected features:";
    for (int f : bundle.selected_features)
      out << ' ' << bundle.feature_names[static_cast<std::size_t>(f)];
    out << "\nthreshold " << fmt(bundle.monitor.threshold_b)
        << ", mean lead " << fmt(bundle.mean_lead) << " s\n";
    out << "bundle written to " << (fs::path(off_f.out_dir) / "bundle").string()
        << "; held-out stream written to "
        << (fs::path(off_f.out_dir) / "test.csv").string() << "\n";
  });

  // run-online ------------------------------------------------------------------
  auto* on = app.add_subcommand(
      "run-online",
      "replay a held-out stream through a bundle and predict remaining life");
  SharedFlags on_f;
  std::string on_bundle;
  add_shared(on, on_f);
  on->add_option("--bundle", on_bundle, "bundle directory")->required();
  on->add_option("--out", on_f.out_dir, "output directory")->required();
  on->callback([&] {
    const ModelBundle bundle = ModelBundle::load(on_bundle);
    TimeSeriesDataset ds = load_input(on_f.data_path, bundle.config);
    const OnlineReport report = run_online(ds, bundle);
    write_report(report, on_f.out_dir);
    out << report.cycles.size() << " cycle(s), " << report.alarmed_cycles
        << " alarmed, " << report.total_points << " trace point(s)\n";
    out << "aggregate rmse " << fmt(report.aggregate_rmse) << ", score "
        << fmt(report.aggregate_score) << "\n";
    out << "report written to " << on_f.out_dir << "\n";
  });

  // evaluate --------------------------------------------------------------------
  auto* ev = app.add_subcommand(
      "evaluate", "recompute metrics from a written report directory");
  SharedFlags ev_f;
  add_shared(ev, ev_f);
  ev->add_option("--out", ev_f.out_dir, "directory for summary.tsv");
  ev->callback([&] {
    const fs::path dir(ev_f.data_path);
    OnlineReport report;
    // Per-cycle alarm facts, when the directory carries them.
    struct AlarmRow {
      bool alarmed = false;
      double lead = 0.0;
    };
    std::map<int, AlarmRow> alarms;
    if (fs::exists(dir / "alarms.tsv")) {
      for (const auto& row : read_tsv(dir / "alarms.tsv")) {
        if (row.size() < 5) continue;
        alarms[static_cast<int>(row[0])] =
            AlarmRow{row[1] != 0.0, row[4]};
      }
    }
    std::vector<int> cycles;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("trace_", 0) == 0 && name.size() > 10)
        cycles.push_back(std::atoi(name.substr(6).c_str()));
    }
    std::sort(cycles.begin(), cycles.end());
    for (int c : cycles) {
      const auto rows = read_tsv(dir / ("trace_" + std::to_string(c) + ".tsv"));
      CycleOutcome outcome;
      outcome.cycle = c;
      outcome.predictions.resize(static_cast<Eigen::Index>(rows.size()));
      outcome.targets.resize(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() < 3)
          throw IngestError("trace_" + std::to_string(c) +
                            ".tsv: expected time, prediction, target columns");
        outcome.trace_times.push_back(rows[i][0]);
        outcome.predictions(static_cast<Eigen::Index>(i)) = rows[i][1];
        outcome.targets(static_cast<Eigen::Index>(i)) = rows[i][2];
      }
      const auto it = alarms.find(c);
      outcome.alarmed = it == alarms.end() ? true : it->second.alarmed;
      outcome.lead_seconds = it == alarms.end() ? 0.0 : it->second.lead;
      report.cycles.push_back(std::move(outcome));
    }

    const EvaluationSummary summary = evaluate(report);
    for (const auto& row : summary.per_cycle)
      out << "cycle " << row.cycle << ": " << row.points << " point(s), rmse "
          << fmt(row.rmse) << ", score " << fmt(row.score) << ", lead "
          << fmt(row.lead_seconds) << " s\n";
    out << "aggregate over " << summary.total_points << " point(s): rmse "
        << fmt(summary.rmse) << ", score " << fmt(summary.score) << "\n";
    if (!ev_f.out_dir.empty()) {
      fs::create_directories(ev_f.out_dir);
      std::ofstream tsv(fs::path(ev_f.out_dir) / "summary.tsv");
      if (!tsv) throw IngestError("cannot write summary.tsv");
      tsv << "cycle\tpoints\trmse\tscore\tlead_seconds\n";
      for (const auto& row : summary.per_cycle)
        tsv << row.cycle << '\t' << row.points << '\t' << fmt_full(row.rmse)
            << '\t' << fmt_full(row.score) << '\t'
            << fmt_full(row.lead_seconds) << '\n';
      tsv << "all\t" << summary.total_points << '\t' << fmt_full(summary.rmse)
          << '\t' << fmt_full(summary.score) << "\t0\n";
    }
  });

  // parse and dispatch --------------------------------------------------------
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("gdcpd");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gdcpd
