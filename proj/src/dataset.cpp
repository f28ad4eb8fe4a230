#include "gdcpd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

#include "gdcpd/errors.hpp"

namespace gdcpd {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(const std::string& line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

// Strict full-token parse; strtod handles signs, exponents, inf and nan.
bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  const std::string buf(cell);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size();
}

std::string line_tag(long line) { return "line " + std::to_string(line); }

}  // namespace

std::vector<std::pair<Eigen::Index, Eigen::Index>>
TimeSeriesDataset::cycle_ranges() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  if (!has_labels()) return out;
  Eigen::Index start = 0;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (labels[static_cast<std::size_t>(i)] == 1) {
      out.emplace_back(start, i);
      start = i + 1;
    }
  }
  return out;
}

TimeSeriesDataset TimeSeriesDataset::slice(Eigen::Index begin,
                                           Eigen::Index end) const {
  if (begin < 0 || end > rows() || begin > end)
    throw PreconditionError("slice range out of bounds");
  TimeSeriesDataset out;
  const Eigen::Index n = end - begin;
  out.timestamps = timestamps.segment(begin, n);
  out.features = features.middleRows(begin, n);
  out.feature_names = feature_names;
  out.standardization = standardization;
  if (has_labels())
    out.labels.assign(labels.begin() + begin, labels.begin() + end);
  if (!exclusion_mask.empty())
    out.exclusion_mask.assign(exclusion_mask.begin() + begin,
                              exclusion_mask.begin() + end);
  return out;
}

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw IngestError(path + ": empty file");
  const auto header = split_fields(line);
  if (header.empty() || header[0] != "time")
    throw IngestError(path + " " + line_tag(1) +
                      ": first column must be named 'time'");
  const bool has_y = header.size() > 1 && header[1] == "y";
  const std::size_t first_feature = has_y ? 2 : 1;
  if (header.size() <= first_feature)
    throw IngestError(path + " " + line_tag(1) + ": no feature columns");

  std::vector<std::string> names(header.begin() +
                                     static_cast<long>(first_feature),
                                 header.end());
  const std::size_t dim = names.size();

  struct Row {
    double t;
    int y;
    std::vector<double> x;
    long source_line;
  };
  std::vector<Row> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::size_t expected = 1 + (has_y ? 1 : 0) + dim;
    if (fields.size() != expected)
      throw IngestError(path + " " + line_tag(lineno) + ": expected " +
                        std::to_string(expected) + " fields, found " +
                        std::to_string(fields.size()));

    Row row;
    row.source_line = lineno;
    if (!parse_double(fields[0], row.t) || !std::isfinite(row.t))
      throw IngestError(path + " " + line_tag(lineno) +
                        ": unreadable time value");
    row.y = 0;
    if (has_y) {
      double y = 0.0;
      if (!parse_double(fields[1], y) || !(y == 0.0 || y == 1.0))
        throw IngestError(path + " " + line_tag(lineno) +
                          ": y must be 0 or 1");
      row.y = static_cast<int>(y);
    }
    row.x.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      double v = kNan;
      if (parse_double(fields[first_feature + d], v) && std::isfinite(v))
        row.x[d] = v;
      else
        row.x[d] = kNan;  // malformed or explicitly missing
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestError(path + ": no data rows");

  int inversions = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i + 1].t < rows[i].t) ++inversions;
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.t < b.t; });
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i].t == rows[i + 1].t)
      throw IngestError(path + ": duplicate timestamp at lines " +
                        std::to_string(rows[i].source_line) + " and " +
                        std::to_string(rows[i + 1].source_line));

  TimeSeriesDataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.timestamps.resize(n);
  ds.features.resize(n, static_cast<Eigen::Index>(dim));
  ds.feature_names = std::move(names);
  if (has_y) ds.labels.resize(rows.size());
  ds.reorder_count = inversions;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    ds.timestamps(i) = row.t;
    if (has_y) ds.labels[static_cast<std::size_t>(i)] = row.y;
    for (std::size_t d = 0; d < dim; ++d)
      ds.features(i, static_cast<Eigen::Index>(d)) = row.x[d];
  }
  return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path);
  out << "time";
  if (ds.has_labels()) out << ",y";
  for (const std::string& name : ds.feature_names) out << "," << name;
  out << "\n";

  char buf[40];
  const auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    emit(ds.timestamps(i));
    if (ds.has_labels()) out << "," << ds.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index d = 0; d < ds.cols(); ++d) {
      out << ",";
      emit(ds.features(i, d));
    }
    out << "\n";
  }
  if (!out) throw IngestError("failed while writing " + path);
}

namespace {

// Fills one column's gaps: interior runs linearly in time, edges by the
// nearest valid value. Returns false when the column has no valid entry.
bool fill_column(const Eigen::VectorXd& t, Eigen::Ref<Eigen::VectorXd> col,
                 int& interior, int& edges) {
  const Eigen::Index n = col.size();
  std::vector<Eigen::Index> valid;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isfinite(col(i))) valid.push_back(i);
  if (valid.empty()) return false;
  if (static_cast<Eigen::Index>(valid.size()) == n) return true;

  for (Eigen::Index i = 0; i < valid.front(); ++i) {
    col(i) = col(valid.front());
    ++edges;
  }
  for (Eigen::Index i = valid.back() + 1; i < n; ++i) {
    col(i) = col(valid.back());
    ++edges;
  }
  for (std::size_t k = 0; k + 1 < valid.size(); ++k) {
    const Eigen::Index a = valid[k], b = valid[k + 1];
    if (b == a + 1) continue;
    const double va = col(a), vb = col(b);
    const double ta = t(a), tb = t(b);
    for (Eigen::Index i = a + 1; i < b; ++i) {
      col(i) = va + (vb - va) * ((t(i) - ta) / (tb - ta));
      ++interior;
    }
  }
  return true;
}

void drop_columns(TimeSeriesDataset& ds, const std::vector<int>& drop,
                  PreprocessReport& report) {
  if (drop.empty()) return;
  std::vector<int> kept;
  for (int d = 0; d < static_cast<int>(ds.cols()); ++d)
    if (std::find(drop.begin(), drop.end(), d) == drop.end())
      kept.push_back(d);
  Eigen::MatrixXd pruned(ds.rows(), static_cast<Eigen::Index>(kept.size()));
  std::vector<std::string> pruned_names;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    pruned.col(static_cast<Eigen::Index>(k)) = ds.features.col(kept[k]);
    pruned_names.push_back(ds.feature_names[static_cast<std::size_t>(kept[k])]);
  }
  for (const int d : drop) {
    report.dropped_features.push_back(d);
    report.dropped_names.push_back(ds.feature_names[static_cast<std::size_t>(d)]);
  }
  ds.features = std::move(pruned);
  ds.feature_names = std::move(pruned_names);
}

}  // namespace

PreprocessReport preprocess(TimeSeriesDataset& ds,
                            const PreprocessConfig& cfg) {
  if (ds.rows() == 0) throw PreconditionError("empty dataset");
  if (!(cfg.restart_exclusion >= 0.0))
    throw PreconditionError("restart exclusion must be non-negative");

  PreprocessReport report;
  if (cfg.interpolate) {
    std::vector<int> empty_columns;
    for (Eigen::Index d = 0; d < ds.cols(); ++d)
      if (!fill_column(ds.timestamps, ds.features.col(d),
                       report.interpolated_cells, report.edge_filled_cells))
        empty_columns.push_back(static_cast<int>(d));
    drop_columns(ds, empty_columns, report);
  }

  ds.exclusion_mask.assign(static_cast<std::size_t>(ds.rows()), 0);
  if (ds.has_labels() && cfg.restart_exclusion > 0.0) {
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if (ds.labels[static_cast<std::size_t>(i)] != 1) continue;
      const double cutoff = ds.timestamps(i) + cfg.restart_exclusion;
      for (Eigen::Index j = i + 1; j < ds.rows() && ds.timestamps(j) <= cutoff;
           ++j)
        ds.exclusion_mask[static_cast<std::size_t>(j)] = 1;
    }
    for (const std::uint8_t m : ds.exclusion_mask) report.excluded_rows += m;
  }

  if (cfg.standardize) {
    const StandardizationStats stats = fit_standardization(ds);
    for (int d = 0; d < static_cast<int>(ds.cols()); ++d)
      if (std::find(stats.kept.begin(), stats.kept.end(), d) ==
          stats.kept.end()) {
        report.dropped_features.push_back(d);
        report.dropped_names.push_back(
            ds.feature_names[static_cast<std::size_t>(d)]);
      }
    apply_standardization(ds, stats);
  }
  return report;
}

StandardizationStats fit_standardization(const TimeSeriesDataset& ds) {
  if (ds.rows() == 0 || ds.cols() == 0)
    throw PreconditionError("nothing to standardize");
  std::vector<Eigen::Index> included;
  for (Eigen::Index i = 0; i < ds.rows(); ++i)
    if (!ds.is_excluded(i)) included.push_back(i);
  if (included.size() < 2)
    throw PreconditionError("standardization needs at least two usable rows");

  StandardizationStats stats;
  const double m = static_cast<double>(included.size());
  for (Eigen::Index d = 0; d < ds.cols(); ++d) {
    double sum = 0.0;
    for (const Eigen::Index i : included) {
      const double v = ds.features(i, d);
      if (!std::isfinite(v))
        throw PreconditionError(
            "standardization hit a missing value; interpolate first");
      sum += v;
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (const Eigen::Index i : included) {
      const double r = ds.features(i, d) - mean;
      sq += r * r;
    }
    const double stddev = std::sqrt(sq / m);
    stats.mean.push_back(mean);
    stats.stddev.push_back(stddev);
    if (stddev > 1e-12) stats.kept.push_back(static_cast<int>(d));
  }
  return stats;
}

void apply_standardization(TimeSeriesDataset& ds,
                           const StandardizationStats& stats) {
  if (static_cast<Eigen::Index>(stats.mean.size()) != ds.cols() ||
      stats.stddev.size() != stats.mean.size())
    throw ShapeError("standardization stats do not match the dataset");

  Eigen::MatrixXd scaled(ds.rows(), static_cast<Eigen::Index>(stats.kept.size()));
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t k = 0; k < stats.kept.size(); ++k) {
    const int d = stats.kept[k];
    const double mean = stats.mean[static_cast<std::size_t>(d)];
    const double stddev = stats.stddev[static_cast<std::size_t>(d)];
    scaled.col(static_cast<Eigen::Index>(k)) =
        (ds.features.col(d).array() - mean) / stddev;
    names.push_back(ds.feature_names[static_cast<std::size_t>(d)]);
    pairs.emplace_back(mean, stddev);
  }
  ds.features = std::move(scaled);
  ds.feature_names = std::move(names);
  ds.standardization = std::move(pairs);
}

SplitResult split_cycles(const TimeSeriesDataset& ds) {
  const auto cycles = ds.cycle_ranges();
  const auto c = static_cast<long>(cycles.size());
  if (c < 5)
    throw PreconditionError("need at least 5 breakdown cycles to split");

  const long n_train = std::lround(0.6 * static_cast<double>(c));
  const long n_val = std::lround(0.2 * static_cast<double>(c));
  const long n_test = c - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw PreconditionError("split would leave an empty portion");

  const Eigen::Index train_end = cycles[static_cast<std::size_t>(n_train - 1)].second + 1;
  const Eigen::Index val_end =
      cycles[static_cast<std::size_t>(n_train + n_val - 1)].second + 1;

  SplitResult out;
  out.train = ds.slice(0, train_end);
  out.validation = ds.slice(train_end, val_end);
  out.test = ds.slice(val_end, ds.rows());  // includes any post-break tail
  return out;
}

}  // namespace gdcpd
