#include "gdcpd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gdcpd/errors.hpp"
#include "gdcpd/gp_classification.hpp"
#include "gdcpd/rng.hpp"

namespace gdcpd {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config plumbing

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  const std::string where = prefix.empty() ? "top level" : prefix;
  if (!j.is_object())
    throw IngestError("config: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw IngestError("config: unknown key " +
                        (prefix.empty() ? it.key() : prefix + "." + it.key()));
  }
}

template <typename T>
void read_field(const json& j, const std::string& prefix, const char* key,
                T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IngestError("config: bad value for " + prefix + "." + key);
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0))
    throw PreconditionError(std::string("config: ") + name +
                            " must be positive");
}

void require_at_least(int v, int lo, const char* name) {
  if (v < lo)
    throw PreconditionError(std::string("config: ") + name +
                            " must be at least " + std::to_string(lo));
}

// ---------------------------------------------------------------------------
// json helpers for the bundle

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& x : a) v(i++) = x.get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 ||
      static_cast<std::size_t>(rows * cols) != data.size())
    throw IngestError("bundle: matrix payload size does not match its shape");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = data.at(k++).get<double>();
  return m;
}

json cp_to_json(const ChangePointResult& r) {
  json j;
  j["indices"] = r.indices;
  j["timestamps"] = r.timestamps;
  j["score"] = vec_to_json(r.score);
  j["mean_diff"] = vec_to_json(r.mean_diff);
  j["attributions"] = mat_to_json(r.attributions);
  j["truncated"] = r.truncated;
  return j;
}

ChangePointResult cp_from_json(const json& j) {
  ChangePointResult r;
  r.indices = j.at("indices").get<std::vector<int>>();
  r.timestamps = j.at("timestamps").get<std::vector<double>>();
  r.score = vec_from_json(j.at("score"));
  r.mean_diff = vec_from_json(j.at("mean_diff"));
  r.attributions = mat_from_json(j.at("attributions"));
  r.truncated = j.at("truncated").get<bool>();
  return r;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// stage wrapper: component failures surface with the stage name attached

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(std::string("stage ") + name + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// cycle views

// One breakdown cycle reduced to its usable rows, with the monitored columns
// pulled out once so every later stage works off the same matrices.
struct CycleView {
  int cycle = 0;
  std::vector<Eigen::Index> rows;  // included rows, dataset indices
  Eigen::VectorXd times;           // one per included row
  Eigen::MatrixXd monitored;       // included rows x selected columns
  Eigen::MatrixXd all_features;    // included rows x all retained columns
  double break_time = 0.0;
  Eigen::Index pre_lo = 0;  // first position inside the pre-break window
  Eigen::Index size() const { return times.size(); }
};

std::vector<CycleView> build_cycle_views(const TimeSeriesDataset& ds,
                                         const std::vector<int>& selected,
                                         double prebreak_window) {
  std::vector<CycleView> out;
  const auto ranges = ds.cycle_ranges();
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    CycleView v;
    v.cycle = static_cast<int>(c);
    for (Eigen::Index r = ranges[c].first; r <= ranges[c].second; ++r)
      if (!ds.is_excluded(r)) v.rows.push_back(r);
    if (v.rows.empty()) continue;
    const Eigen::Index n = static_cast<Eigen::Index>(v.rows.size());
    v.times.resize(n);
    v.monitored.resize(n, static_cast<Eigen::Index>(selected.size()));
    v.all_features.resize(n, ds.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      v.times(i) = ds.timestamps(v.rows[static_cast<std::size_t>(i)]);
      v.all_features.row(i) =
          ds.features.row(v.rows[static_cast<std::size_t>(i)]);
      for (std::size_t j = 0; j < selected.size(); ++j)
        v.monitored(i, static_cast<Eigen::Index>(j)) =
            ds.features(v.rows[static_cast<std::size_t>(i)], selected[j]);
    }
    v.break_time = ds.timestamps(ranges[c].second);
    v.pre_lo = n;
    for (Eigen::Index i = 0; i < n; ++i)
      if (v.times(i) > v.break_time - prebreak_window) {
        v.pre_lo = i;
        break;
      }
    out.push_back(std::move(v));
  }
  return out;
}

// Statistic visible after row `pos` has arrived: entry i of the series is
// the boundary k = A + i, emitted once 2A samples are in, so the freshest
// index after pos+1 samples is pos+1-2A. Zero before anything is emitted.
double visible_wmd(const Eigen::VectorXd& series, Eigen::Index pos, int a) {
  const Eigen::Index idx = pos + 1 - 2 * static_cast<Eigen::Index>(a);
  if (idx < 0 || idx >= series.size()) {
    if (idx >= series.size() && series.size() > 0)
      return series(series.size() - 1);
    return 0.0;
  }
  return series(idx);
}

// Network inputs for positions [lo, hi] of a cycle view: the monitored
// features, elapsed time relative to t0 in pre-break-window units, and the
// freshest boundary statistic at each row.
Eigen::MatrixXd build_inputs(const CycleView& v, const Eigen::VectorXd& wmd,
                             int window_a, double t0, double prebreak_window,
                             Eigen::Index lo, Eigen::Index hi) {
  const Eigen::Index t = hi - lo + 1;
  const Eigen::Index s = v.monitored.cols();
  Eigen::MatrixXd inputs(t, s + 2);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Eigen::Index pos = lo + i;
    inputs.block(i, 0, 1, s) = v.monitored.row(pos);
    inputs(i, s) = (v.times(pos) - t0) / prebreak_window;
    inputs(i, s + 1) = visible_wmd(wmd, pos, window_a);
  }
  return inputs;
}

// First position with time strictly inside (t_end - prebreak_window, t_end].
Eigen::Index window_start(const CycleView& v, double t_end,
                          double prebreak_window, Eigen::Index hi) {
  Eigen::Index lo = hi;
  while (lo > 0 && v.times(lo - 1) > t_end - prebreak_window) --lo;
  return lo;
}

struct CrossedCycle {
  const CycleView* view = nullptr;
  Eigen::VectorXd wmd;
  Eigen::Index cross_pos = 0;  // row position that completed the crossing
  double lead = 0.0;           // break_time - time at cross_pos
};

// Replays the boundary statistic over one cycle and finds the first
// threshold crossing, if any. The crossing becomes observable at the row
// completing the right-hand window, position k + A - 1.
std::optional<CrossedCycle> find_crossing(const CycleView& v,
                                          const MonitorConfig& mc) {
  if (v.size() < 2 * mc.window_a) return std::nullopt;
  CrossedCycle out;
  out.view = &v;
  out.wmd = wmd_series(v.monitored, mc);
  const auto hit = stopping_time(out.wmd, mc.threshold_b);
  if (!hit) return std::nullopt;
  const Eigen::Index boundary = mc.window_a + *hit;
  out.cross_pos = boundary + mc.window_a - 1;
  out.lead = v.break_time - v.times(out.cross_pos);
  return out;
}

Sequence make_rul_sequence(const CrossedCycle& c, const PipelineConfig& cfg,
                           double t_break_ref) {
  const CycleView& v = *c.view;
  const double t_cross = v.times(c.cross_pos);
  const Eigen::Index lo =
      window_start(v, t_cross, cfg.data.prebreak_window, c.cross_pos);
  Sequence seq;
  seq.inputs = build_inputs(v, c.wmd, cfg.monitor.window_a, v.times(lo),
                            cfg.data.prebreak_window, lo, c.cross_pos);
  const double scale = t_break_ref - v.times(lo);
  seq.targets.resize(c.cross_pos - lo + 1);
  for (Eigen::Index i = 0; i <= c.cross_pos - lo; ++i)
    seq.targets(i) = (t_break_ref - v.times(lo + i)) / scale;
  return seq;
}

void append_tsv(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out)
    throw PipelineError("stage report: cannot write " + p.string());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// PipelineConfig

void PipelineConfig::validate() const {
  if (data.restart_exclusion < 0.0)
    throw PreconditionError("config: data.restart_exclusion must not be negative");
  require_positive(data.cadence, "data.cadence");
  require_positive(data.prebreak_window, "data.prebreak_window");
  require_positive(features.ard_threshold, "features.ard_threshold");
  require_at_least(features.max_rows, 20, "features.max_rows");
  require_at_least(gdcpd.k, 1, "gdcpd.k");
  require_at_least(gdcpd.window_a, 1, "gdcpd.window_a");
  require_at_least(gdcpd.hyper_subsample, 10, "gdcpd.hyper_subsample");
  require_at_least(gdcpd.support_subsample, 10, "gdcpd.support_subsample");
  require_at_least(monitor.window_a, 1, "monitor.window_a");
  require_at_least(rul.hidden, 1, "rul.hidden");
  require_at_least(rul.layers, 1, "rul.layers");
  if (!(rul.dropout >= 0.0 && rul.dropout < 1.0))
    throw PreconditionError("config: rul.dropout must lie in [0, 1)");
  require_at_least(rul.epochs, 1, "rul.epochs");
  require_positive(rul.learning_rate, "rul.learning_rate");
  if (rul.calibration_epochs < 0)
    throw PreconditionError("config: rul.calibration_epochs must not be negative");
  if (rul.calibration_lr_scale < 0.0)
    throw PreconditionError("config: rul.calibration_lr_scale must not be negative");
  if (rul.floor < 0.0)
    throw PreconditionError("config: rul.floor must not be negative");
}

nlohmann::json PipelineConfig::to_json() const {
  json j;
  j["data"] = {{"restart_exclusion", data.restart_exclusion},
               {"cadence", data.cadence},
               {"prebreak_window", data.prebreak_window}};
  j["features"] = {{"ard_threshold", features.ard_threshold},
                   {"max_rows", features.max_rows}};
  j["gdcpd"] = {{"k", gdcpd.k},
                {"window_a", gdcpd.window_a},
                {"hyper_subsample", gdcpd.hyper_subsample},
                {"support_subsample", gdcpd.support_subsample}};
  j["monitor"] = {{"window_a", monitor.window_a}};
  j["rul"] = {{"hidden", rul.hidden},
              {"layers", rul.layers},
              {"dropout", rul.dropout},
              {"epochs", rul.epochs},
              {"learning_rate", rul.learning_rate},
              {"calibration_epochs", rul.calibration_epochs},
              {"calibration_lr_scale", rul.calibration_lr_scale},
              {"floor", rul.floor}};
  j["seeds"] = {{"root", seeds.root}};
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  check_keys(j, "", {"data", "features", "gdcpd", "monitor", "rul", "seeds"});
  if (j.contains("data")) {
    const json& s = j.at("data");
    check_keys(s, "data", {"restart_exclusion", "cadence", "prebreak_window"});
    read_field(s, "data", "restart_exclusion", cfg.data.restart_exclusion);
    read_field(s, "data", "cadence", cfg.data.cadence);
    read_field(s, "data", "prebreak_window", cfg.data.prebreak_window);
  }
  if (j.contains("features")) {
    const json& s = j.at("features");
    check_keys(s, "features", {"ard_threshold", "max_rows"});
    read_field(s, "features", "ard_threshold", cfg.features.ard_threshold);
    read_field(s, "features", "max_rows", cfg.features.max_rows);
  }
  if (j.contains("gdcpd")) {
    const json& s = j.at("gdcpd");
    check_keys(s, "gdcpd",
               {"k", "window_a", "hyper_subsample", "support_subsample"});
    read_field(s, "gdcpd", "k", cfg.gdcpd.k);
    read_field(s, "gdcpd", "window_a", cfg.gdcpd.window_a);
    read_field(s, "gdcpd", "hyper_subsample", cfg.gdcpd.hyper_subsample);
    read_field(s, "gdcpd", "support_subsample", cfg.gdcpd.support_subsample);
  }
  if (j.contains("monitor")) {
    const json& s = j.at("monitor");
    check_keys(s, "monitor", {"window_a"});
    read_field(s, "monitor", "window_a", cfg.monitor.window_a);
  }
  if (j.contains("rul")) {
    const json& s = j.at("rul");
    check_keys(s, "rul",
               {"hidden", "layers", "dropout", "epochs", "learning_rate",
                "calibration_epochs", "calibration_lr_scale", "floor"});
    read_field(s, "rul", "hidden", cfg.rul.hidden);
    read_field(s, "rul", "layers", cfg.rul.layers);
    read_field(s, "rul", "dropout", cfg.rul.dropout);
    read_field(s, "rul", "epochs", cfg.rul.epochs);
    read_field(s, "rul", "learning_rate", cfg.rul.learning_rate);
    read_field(s, "rul", "calibration_epochs", cfg.rul.calibration_epochs);
    read_field(s, "rul", "calibration_lr_scale", cfg.rul.calibration_lr_scale);
    read_field(s, "rul", "floor", cfg.rul.floor);
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    check_keys(s, "seeds", {"root"});
    read_field(s, "seeds", "root", cfg.seeds.root);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IngestError("config: " + std::string(e.what()));
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// exposed stage helpers

std::pair<Eigen::MatrixXd, std::vector<int>> classification_rows(
    const TimeSeriesDataset& ds, double prebreak_window, int max_rows) {
  if (!ds.has_labels())
    throw PreconditionError("classification rows need labeled break cycles");
  std::vector<Eigen::Index> pos, neg;
  for (const auto& range : ds.cycle_ranges()) {
    const double t_break = ds.timestamps(range.second);
    for (Eigen::Index r = range.first; r <= range.second; ++r) {
      if (ds.is_excluded(r)) continue;
      if (ds.timestamps(r) > t_break - prebreak_window)
        pos.push_back(r);
      else
        neg.push_back(r);
    }
  }
  if (pos.empty() || neg.empty())
    throw PreconditionError(
        "need both pre-break and ordinary rows to rank features");
  const auto thin = [](std::vector<Eigen::Index>& v, std::size_t cap) {
    if (v.size() <= cap) return;
    const std::size_t step = (v.size() + cap - 1) / cap;
    std::vector<Eigen::Index> kept;
    for (std::size_t i = 0; i < v.size(); i += step) kept.push_back(v[i]);
    v = std::move(kept);
  };
  const std::size_t cap = static_cast<std::size_t>(std::max(max_rows / 2, 10));
  thin(pos, cap);
  thin(neg, cap);

  Eigen::MatrixXd x(pos.size() + neg.size(), ds.cols());
  std::vector<int> labels(pos.size() + neg.size(), 0);
  Eigen::Index row = 0;
  for (Eigen::Index r : pos) {
    x.row(row) = ds.features.row(r);
    labels[static_cast<std::size_t>(row)] = 1;
    ++row;
  }
  for (Eigen::Index r : neg) x.row(row++) = ds.features.row(r);
  return {std::move(x), std::move(labels)};
}

nlohmann::json monitor_to_json(const MonitorConfig& mc) {
  json j;
  j["window_a"] = mc.window_a;
  j["weights"] = vec_to_json(mc.weights);
  j["cov_inv"] = mat_to_json(mc.cov_inv);
  j["threshold_b"] = mc.threshold_b;
  return j;
}

MonitorConfig monitor_from_json(const nlohmann::json& j) {
  MonitorConfig mc;
  try {
    mc.window_a = j.at("window_a").get<int>();
    mc.weights = vec_from_json(j.at("weights"));
    mc.cov_inv = mat_from_json(j.at("cov_inv"));
    mc.threshold_b = j.at("threshold_b").get<double>();
  } catch (const json::exception& e) {
    throw IngestError("monitor: " + std::string(e.what()));
  }
  mc.validate();
  return mc;
}

std::vector<Sequence> rul_sequences(const TimeSeriesDataset& standardized,
                                    const ModelBundle& bundle,
                                    std::vector<double>* leads) {
  const PipelineConfig& cfg = bundle.config;
  std::vector<Sequence> out;
  const auto views = build_cycle_views(standardized, bundle.selected_features,
                                       cfg.data.prebreak_window);
  for (const auto& v : views) {
    const auto crossed = find_crossing(v, bundle.monitor);
    if (!crossed) continue;
    Sequence seq = make_rul_sequence(*crossed, cfg, v.break_time);
    if (seq.targets.size() < 4) continue;
    out.push_back(std::move(seq));
    if (leads != nullptr) leads->push_back(crossed->lead);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ModelBundle

nlohmann::json ModelBundle::to_json() const {
  json j;
  j["schema"] = "gdcpd.bundle/1";
  j["config"] = config.to_json();
  j["feature_names"] = feature_names;
  j["standardization"] = {{"mean", standardization.mean},
                          {"stddev", standardization.stddev},
                          {"kept", standardization.kept}};
  j["selected_features"] = selected_features;
  j["ard_length_scales"] = vec_to_json(ard_length_scales);
  json gps = json::array();
  for (const auto& gp : feature_gps) gps.push_back(gp.to_json());
  j["feature_gps"] = std::move(gps);
  json dets = json::array();
  for (const auto& d : detections) dets.push_back(cp_to_json(d));
  j["detections"] = std::move(dets);
  j["monitor"] = monitor_to_json(monitor);
  j["mean_lead"] = mean_lead;
  j["rul"] = rul.to_json();
  return j;
}

ModelBundle ModelBundle::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "gdcpd.bundle/1")
    throw IngestError("unsupported bundle schema: " +
                      j.value("schema", std::string("<missing>")));
  ModelBundle b;
  try {
    b.config = PipelineConfig::from_json(j.at("config"));
    b.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const json& st = j.at("standardization");
    b.standardization.mean = st.at("mean").get<std::vector<double>>();
    b.standardization.stddev = st.at("stddev").get<std::vector<double>>();
    b.standardization.kept = st.at("kept").get<std::vector<int>>();
    b.selected_features = j.at("selected_features").get<std::vector<int>>();
    b.ard_length_scales = vec_from_json(j.at("ard_length_scales"));
    for (const auto& g : j.at("feature_gps"))
      b.feature_gps.push_back(GpRegressor::from_json(g));
    for (const auto& d : j.at("detections"))
      b.detections.push_back(cp_from_json(d));
    b.monitor = monitor_from_json(j.at("monitor"));
    b.mean_lead = j.at("mean_lead").get<double>();
    b.rul = RulNetwork::from_json(j.at("rul"));
  } catch (const json::exception& e) {
    throw IngestError("bundle: " + std::string(e.what()));
  }
  if (!std::isfinite(b.mean_lead) || b.mean_lead < 0.0)
    throw IngestError("bundle: mean_lead must be finite and non-negative");
  b.monitor.validate();
  return b;
}

void ModelBundle::save(const std::string& dir) const {
  fs::create_directories(dir);
  const std::string payload = to_json().dump(2);
  {
    std::ofstream out(fs::path(dir) / "bundle.json",
                      std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write bundle to " + dir);
    out << payload;
    if (!out) throw IngestError("cannot write bundle to " + dir);
  }
  json manifest;
  manifest["schema"] = "gdcpd.bundle/1";
  manifest["file"] = "bundle.json";
  manifest["fnv1a64"] = hex16(fnv1a64(payload));
  std::ofstream out(fs::path(dir) / "manifest.json",
                    std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write manifest to " + dir);
  out << manifest.dump(2);
}

ModelBundle ModelBundle::load(const std::string& dir) {
  std::ifstream min(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!min) throw IngestError("cannot open manifest in " + dir);
  json manifest;
  try {
    min >> manifest;
  } catch (const json::exception& e) {
    throw IngestError("manifest: " + std::string(e.what()));
  }
  if (manifest.value("schema", "") != "gdcpd.bundle/1")
    throw IngestError("unsupported bundle schema in manifest");
  const std::string file = manifest.value("file", "bundle.json");
  std::ifstream bin(fs::path(dir) / file, std::ios::binary);
  if (!bin) throw IngestError("cannot open bundle file in " + dir);
  std::ostringstream buf;
  buf << bin.rdbuf();
  const std::string payload = buf.str();
  const std::string expect = manifest.value("fnv1a64", "");
  if (hex16(fnv1a64(payload)) != expect)
    throw IngestError("bundle content hash does not match its manifest");
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw IngestError("bundle: " + std::string(e.what()));
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// offline phase

ModelBundle run_offline(const TimeSeriesDataset& train,
                        const TimeSeriesDataset& validation,
                        const PipelineConfig& cfg) {
  cfg.validate();
  if (!train.has_labels() || !validation.has_labels())
    throw PreconditionError("offline phase needs labeled break cycles");
  if (train.cycle_ranges().empty())
    throw PreconditionError("training data holds no complete cycle");

  ModelBundle bundle;
  bundle.config = cfg;

  // Location and scale come from the training rows alone; the same
  // transform is then applied to every other split.
  TimeSeriesDataset tr = train;
  TimeSeriesDataset va = validation;
  stage("standardize", [&] {
    bundle.standardization = fit_standardization(train);
    apply_standardization(tr, bundle.standardization);
    apply_standardization(va, bundle.standardization);
  });
  bundle.feature_names = tr.feature_names;

  // Relevance: classify pre-break rows against ordinary operation and keep
  // the features whose ARD length-scales come out short.
  stage("select-features", [&] {
    const auto [x, labels] = classification_rows(tr, cfg.data.prebreak_window,
                                                 cfg.features.max_rows);
    KernelHyperparams init;
    init.signal_variance = 1.0;
    init.length_scales = Eigen::VectorXd::Ones(tr.cols());
    init.noise_variance = 0.0;
    GpClassifierOptions copts;
    copts.seed = substream_seed(cfg.seeds.root, "classify");
    const GpClassifier clf = GpClassifier::fit_laplace(x, labels, init, copts);
    bundle.ard_length_scales = clf.lengthscales();
    bundle.selected_features =
        select_features(clf.lengthscales(), cfg.features.ard_threshold);
    if (bundle.selected_features.empty())
      throw FitError("no feature cleared the relevance threshold " +
                     std::to_string(cfg.features.ard_threshold));
  });

  const auto train_views =
      build_cycle_views(tr, bundle.selected_features, cfg.data.prebreak_window);

  // Change-point detection over each training cycle's pre-break window. The
  // derivative means around each detection feed the monitor weights.
  Eigen::MatrixXd weight_rows;
  stage("detect", [&] {
    const Eigen::Index min_rows =
        std::max<Eigen::Index>(2 * cfg.gdcpd.window_a, 4);
    std::vector<int> all(bundle.selected_features.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    for (const auto& v : train_views) {
      const Eigen::Index n = v.size() - v.pre_lo;
      if (n < min_rows) continue;
      DetectOptions dopts;
      dopts.k_count = cfg.gdcpd.k;
      dopts.window_a = cfg.gdcpd.window_a;
      dopts.hyper_subsample = cfg.gdcpd.hyper_subsample;
      dopts.support_subsample = cfg.gdcpd.support_subsample;
      dopts.fit.seed =
          substream_seed(cfg.seeds.root, "detect") + static_cast<std::uint64_t>(v.cycle);
      const Eigen::VectorXd t_pre = v.times.segment(v.pre_lo, n);
      const Eigen::MatrixXd x_pre = v.monitored.middleRows(v.pre_lo, n);
      Eigen::MatrixXd grads;
      ChangePointResult det = detect(t_pre, x_pre, all, dopts, &grads);
      for (int idx : det.indices) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, idx - cfg.gdcpd.window_a);
        const Eigen::Index hi =
            std::min<Eigen::Index>(grads.rows() - 1, idx + cfg.gdcpd.window_a);
        const Eigen::Index old = weight_rows.rows();
        weight_rows.conservativeResize(old + hi - lo + 1, grads.cols());
        weight_rows.middleRows(old, hi - lo + 1) = grads.middleRows(lo, hi - lo + 1);
      }
      bundle.detections.push_back(std::move(det));
    }
    if (bundle.detections.empty())
      throw FitError("no training cycle had a usable pre-break window");

    // Reference per-feature fits over the most recent usable window, kept
    // so downstream tools can inspect the fitted dynamics.
    const CycleView* last = nullptr;
    for (const auto& v : train_views)
      if (v.size() - v.pre_lo >= min_rows) last = &v;
    const Eigen::Index n = last->size() - last->pre_lo;
    const Eigen::VectorXd t_pre = last->times.segment(last->pre_lo, n);
    const double span = t_pre(n - 1) - t_pre(0);
    for (std::size_t f = 0; f < bundle.selected_features.size(); ++f) {
      KernelHyperparams init;
      init.signal_variance = 1.0;
      init.length_scales = Eigen::VectorXd::Constant(1, span / 10.0);
      init.noise_variance = 0.1;
      GpFitOptions gopts;
      gopts.seed = substream_seed(cfg.seeds.root, "feature-gp") +
                   static_cast<std::uint64_t>(f);
      bundle.feature_gps.push_back(GpRegressor::fit(
          t_pre,
          last->monitored.col(static_cast<Eigen::Index>(f))
              .segment(last->pre_lo, n),
          init, gopts));
    }
  });

  // Monitor calibration: weights from the detections, covariance from
  // ordinary-operation rows, threshold from the pre-break segments.
  stage("monitor", [&] {
    bundle.monitor.window_a = cfg.monitor.window_a;
    bundle.monitor.weights = derivative_weights(weight_rows);

    Eigen::Index n_healthy = 0;
    for (const auto& v : train_views) n_healthy += v.pre_lo;
    if (n_healthy < static_cast<Eigen::Index>(bundle.selected_features.size()) + 2)
      throw PreconditionError("too few ordinary-operation rows for a covariance");
    Eigen::MatrixXd healthy(
        n_healthy, static_cast<Eigen::Index>(bundle.selected_features.size()));
    Eigen::Index at = 0;
    for (const auto& v : train_views) {
      healthy.middleRows(at, v.pre_lo) = v.monitored.topRows(v.pre_lo);
      at += v.pre_lo;
    }
    bundle.monitor.cov_inv = estimate_cov_inv(healthy);

    std::vector<Eigen::MatrixXd> segments;
    const Eigen::Index min_rows = 2 * cfg.monitor.window_a;
    for (const auto& v : train_views) {
      const Eigen::Index n = v.size() - v.pre_lo;
      if (n >= min_rows) segments.push_back(v.monitored.middleRows(v.pre_lo, n));
    }
    if (segments.empty())
      throw PreconditionError("no pre-break segment is long enough to calibrate");
    bundle.monitor.threshold_b = offline_threshold(segments, bundle.monitor);
    bundle.monitor.validate();
  });

  // Remaining-life training windows end at each cycle's first threshold
  // crossing, mirroring exactly what the online phase will see.
  stage("train-rul", [&] {
    std::vector<double> leads;
    std::vector<Sequence> train_seqs = rul_sequences(tr, bundle, &leads);
    std::vector<Sequence> val_seqs = rul_sequences(va, bundle);
    if (train_seqs.empty())
      throw FitError("no training cycle crossed the calibrated threshold");
    if (val_seqs.empty()) val_seqs = train_seqs;  // degenerate but workable
    bundle.mean_lead = 0.0;
    for (double lead : leads) bundle.mean_lead += lead;
    bundle.mean_lead /= static_cast<double>(leads.size());

    const int input_size = static_cast<int>(bundle.selected_features.size()) + 2;
    bundle.rul = RulNetwork(input_size, cfg.rul.hidden, cfg.rul.layers,
                            cfg.rul.dropout,
                            substream_seed(cfg.seeds.root, "rul-init"));
    TrainOptions topts;
    topts.epochs = cfg.rul.epochs;
    topts.learning_rate = cfg.rul.learning_rate;
    topts.seed = substream_seed(cfg.seeds.root, "rul-train");
    bundle.rul.train(train_seqs, val_seqs, topts);
  });

  return bundle;
}

// ---------------------------------------------------------------------------
// online phase

OnlineReport run_online(const TimeSeriesDataset& test,
                        const ModelBundle& bundle) {
  const PipelineConfig& cfg = bundle.config;
  bundle.monitor.validate();
  if (!test.has_labels())
    throw PreconditionError("online replay needs labeled break cycles");

  TimeSeriesDataset ts = test;
  stage("standardize", [&] { apply_standardization(ts, bundle.standardization); });
  if (ts.feature_names != bundle.feature_names)
    throw PreconditionError("test columns do not match the fitted bundle");

  const auto views =
      build_cycle_views(ts, bundle.selected_features, cfg.data.prebreak_window);

  OnlineReport report;
  for (const auto& v : views) {
    CycleOutcome outcome;
    outcome.cycle = v.cycle;
    outcome.break_time = v.break_time;

    // Streamed replay; the statistic series doubles as a network input.
    std::vector<double> emitted;
    Eigen::Index alarm_pos = -1;
    stage("monitor", [&] {
      OnlineMonitor monitor(bundle.monitor);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const auto value = monitor.push(v.monitored.row(i).transpose());
        if (value) {
          emitted.push_back(*value);
          outcome.wmd_times.push_back(v.times(i));
          outcome.wmd_values.push_back(*value);
        }
        if (alarm_pos < 0 && monitor.first_alarm()) alarm_pos = i;
      }
    });
    if (alarm_pos < 0) {
      report.cycles.push_back(std::move(outcome));
      continue;
    }
    outcome.alarmed = true;
    outcome.alarm_time = v.times(alarm_pos);
    outcome.lead_seconds = v.break_time - outcome.alarm_time;

    Eigen::VectorXd wmd(static_cast<Eigen::Index>(emitted.size()));
    for (std::size_t i = 0; i < emitted.size(); ++i)
      wmd(static_cast<Eigen::Index>(i)) = emitted[i];

    // Fine-tune the forecaster on the hour leading up to the alarm, with
    // the break time estimated from the training leads.
    const double t_alarm = outcome.alarm_time;
    const double t_break_est = t_alarm + bundle.mean_lead;
    const Eigen::Index c_lo =
        window_start(v, t_alarm, cfg.data.prebreak_window, alarm_pos);
    const double t0 = v.times(c_lo);
    const double scale_est = t_break_est - t0;
    const double scale_true = v.break_time - t0;

    RulNetwork tuned;
    stage("calibrate", [&] {
      Sequence seg;
      seg.inputs = build_inputs(v, wmd, bundle.monitor.window_a, t0,
                                cfg.data.prebreak_window, c_lo, alarm_pos);
      seg.targets.resize(alarm_pos - c_lo + 1);
      for (Eigen::Index i = 0; i <= alarm_pos - c_lo; ++i)
        seg.targets(i) = (t_break_est - v.times(c_lo + i)) / scale_est;
      TrainOptions base;
      base.learning_rate = cfg.rul.learning_rate;
      base.seed = substream_seed(cfg.seeds.root, "calibrate") +
                  static_cast<std::uint64_t>(v.cycle);
      tuned = bundle.rul.calibrated(seg, base, cfg.rul.calibration_epochs,
                                    cfg.rul.calibration_lr_scale);
    });

    stage("predict", [&] {
      Eigen::Index trace_end = alarm_pos - 1;
      while (trace_end + 1 < v.size() &&
             v.break_time - v.times(trace_end + 1) >= cfg.rul.floor)
        ++trace_end;
      if (trace_end < alarm_pos) return;  // alarm landed inside the floor

      const Eigen::MatrixXd inputs =
          build_inputs(v, wmd, bundle.monitor.window_a, t0,
                       cfg.data.prebreak_window, c_lo, trace_end);
      const Eigen::Index points = trace_end - alarm_pos + 1;
      outcome.predictions.resize(points);
      outcome.targets.resize(points);
      for (Eigen::Index i = 0; i < points; ++i) {
        const Eigen::Index pos = alarm_pos + i;
        const Eigen::VectorXd preds =
            tuned.predict(inputs.topRows(pos - c_lo + 1));
        outcome.trace_times.push_back(v.times(pos));
        outcome.predictions(i) = preds(preds.size() - 1) * scale_est / scale_true;
        outcome.targets(i) = (v.break_time - v.times(pos)) / scale_true;
      }
      outcome.rmse = rmse(outcome.predictions, outcome.targets);
      outcome.score = score_function(outcome.predictions, outcome.targets);
    });

    report.cycles.push_back(std::move(outcome));
  }

  Eigen::Index total = 0;
  for (const auto& c : report.cycles) {
    if (c.alarmed) ++report.alarmed_cycles;
    total += c.predictions.size();
  }
  report.total_points = static_cast<int>(total);
  if (total > 0) {
    Eigen::VectorXd all_pred(total), all_true(total);
    Eigen::Index at = 0;
    for (const auto& c : report.cycles) {
      all_pred.segment(at, c.predictions.size()) = c.predictions;
      all_true.segment(at, c.predictions.size()) = c.targets;
      at += c.predictions.size();
    }
    report.aggregate_rmse = rmse(all_pred, all_true);
    report.aggregate_score = score_function(all_pred, all_true);
  }
  return report;
}

// ---------------------------------------------------------------------------
// evaluation and reporting

EvaluationSummary evaluate(const OnlineReport& report) {
  if (report.cycles.empty())
    throw PreconditionError("nothing to evaluate: the report has no cycles");
  EvaluationSummary summary;
  summary.total_cycles = static_cast<int>(report.cycles.size());
  Eigen::Index total = 0;
  for (const auto& c : report.cycles) {
    if (c.predictions.size() != c.targets.size())
      throw ShapeError("cycle " + std::to_string(c.cycle) +
                       " has mismatched prediction and target lengths");
    EvaluationRow row;
    row.cycle = c.cycle;
    row.alarmed = c.alarmed;
    row.points = static_cast<int>(c.predictions.size());
    row.lead_seconds = c.lead_seconds;
    if (row.points > 0) {
      row.rmse = rmse(c.predictions, c.targets);
      row.score = score_function(c.predictions, c.targets);
    }
    if (c.alarmed) ++summary.alarmed_cycles;
    total += c.predictions.size();
    summary.per_cycle.push_back(row);
  }
  summary.total_points = static_cast<int>(total);
  if (total > 0) {
    Eigen::VectorXd all_pred(total), all_true(total);
    Eigen::Index at = 0;
    for (const auto& c : report.cycles) {
      all_pred.segment(at, c.predictions.size()) = c.predictions;
      all_true.segment(at, c.predictions.size()) = c.targets;
      at += c.predictions.size();
    }
    summary.rmse = rmse(all_pred, all_true);
    summary.score = score_function(all_pred, all_true);
  }
  return summary;
}

void write_report(const OnlineReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  {
    auto out = open_out(dir / "report.txt");
    out << "cycles: " << report.cycles.size() << "\n";
    out << "alarmed: " << report.alarmed_cycles << "\n";
    out << "trace points: " << report.total_points << "\n";
    char line[128];
    std::snprintf(line, sizeof line, "aggregate rmse: %.6g\n",
                  report.aggregate_rmse);
    out << line;
    std::snprintf(line, sizeof line, "aggregate score: %.6g\n",
                  report.aggregate_score);
    out << line;
    for (const auto& c : report.cycles) {
      if (c.alarmed)
        std::snprintf(line, sizeof line,
                      "cycle %d: alarm at %.6g, break at %.6g, lead %.6g s, "
                      "%d points, rmse %.6g\n",
                      c.cycle, c.alarm_time, c.break_time, c.lead_seconds,
                      static_cast<int>(c.predictions.size()), c.rmse);
      else
        std::snprintf(line, sizeof line, "cycle %d: no alarm, break at %.6g\n",
                      c.cycle, c.break_time);
      out << line;
    }
  }

  {
    auto out = open_out(dir / "alarms.tsv");
    out << "cycle\talarmed\talarm_time\tbreak_time\tlead_seconds\tpoints\t"
           "rmse\tscore\n";
    for (const auto& c : report.cycles) {
      out << c.cycle << '\t' << (c.alarmed ? 1 : 0) << '\t';
      append_tsv(out, c.alarm_time);
      out << '\t';
      append_tsv(out, c.break_time);
      out << '\t';
      append_tsv(out, c.lead_seconds);
      out << '\t' << c.predictions.size() << '\t';
      append_tsv(out, c.rmse);
      out << '\t';
      append_tsv(out, c.score);
      out << '\n';
    }
  }

  for (const auto& c : report.cycles) {
    {
      auto out = open_out(dir / ("wmd_" + std::to_string(c.cycle) + ".tsv"));
      out << "time\twmd\n";
      for (std::size_t i = 0; i < c.wmd_values.size(); ++i) {
        append_tsv(out, c.wmd_times[i]);
        out << '\t';
        append_tsv(out, c.wmd_values[i]);
        out << '\n';
      }
    }
    if (c.predictions.size() > 0) {
      auto out = open_out(dir / ("trace_" + std::to_string(c.cycle) + ".tsv"));
      out << "time\tprediction\ttarget\n";
      for (Eigen::Index i = 0; i < c.predictions.size(); ++i) {
        append_tsv(out, c.trace_times[static_cast<std::size_t>(i)]);
        out << '\t';
        append_tsv(out, c.predictions(i));
        out << '\t';
        append_tsv(out, c.targets(i));
        out << '\n';
      }
    }
  }
}

}  // namespace gdcpd
