#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gdcpd/dataset.hpp"
#include "gdcpd/errors.hpp"

using gdcpd::PreprocessConfig;
using gdcpd::TimeSeriesDataset;

namespace {

std::string write_file(const std::string& name, const std::string& body) {
  const std::string path = "/tmp/gdcpd_" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

// 2-minute cadence with one break; n rows starting at t = 0.
TimeSeriesDataset cadence_fixture(int n, int break_row) {
  TimeSeriesDataset ds;
  ds.timestamps.resize(n);
  ds.features.resize(n, 2);
  ds.feature_names = {"x1", "x2"};
  ds.labels.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    ds.timestamps(i) = 120.0 * i;
    ds.features(i, 0) = 0.1 * i;
    ds.features(i, 1) = std::sin(0.3 * i);
  }
  ds.labels[static_cast<std::size_t>(break_row)] = 1;
  return ds;
}

// One two-row cycle per break, optional trailing tail rows.
TimeSeriesDataset cycles_fixture(int cycles, int tail_rows) {
  const int n = 2 * cycles + tail_rows;
  TimeSeriesDataset ds;
  ds.timestamps.resize(n);
  ds.features.resize(n, 1);
  ds.feature_names = {"x1"};
  ds.labels.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    ds.timestamps(i) = 10.0 * i;
    ds.features(i, 0) = static_cast<double>(i);
  }
  for (int c = 0; c < cycles; ++c) ds.labels[static_cast<std::size_t>(2 * c + 1)] = 1;
  return ds;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("a well-formed file loads with inferred dimensions") {
  const auto path = write_file("basic.csv",
                               "time,y,x1,x2\n"
                               "0,0,1.5,2.5\n"
                               "120,0,1.6,2.4\n"
                               "240,1,1.7,2.3\n");
  const auto ds = gdcpd::load_csv(path);
  CHECK(ds.rows() == 3);
  CHECK(ds.cols() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"x1", "x2"});
  CHECK(ds.has_labels());
  CHECK(ds.labels == std::vector<int>{0, 0, 1});
  CHECK(ds.timestamps(2) == 240.0);
  CHECK(ds.features(1, 1) == 2.4);
  CHECK(ds.reorder_count == 0);

  const auto no_y = write_file("no_y.csv",
                               "time,x1\n"
                               "0,1\n"
                               "1,2\n");
  const auto ds2 = gdcpd::load_csv(no_y);
  CHECK_FALSE(ds2.has_labels());
  CHECK(ds2.cols() == 1);
}

TEST_CASE("out-of-order rows come back sorted with a warning count") {
  const auto path = write_file("unsorted.csv",
                               "time,x1\n"
                               "100,10\n"
                               "50,5\n"
                               "150,15\n");
  const auto ds = gdcpd::load_csv(path);
  CHECK(ds.reorder_count == 1);
  CHECK(ds.timestamps(0) == 50.0);
  CHECK(ds.timestamps(1) == 100.0);
  CHECK(ds.timestamps(2) == 150.0);
  // Values travel with their timestamps.
  CHECK(ds.features(0, 0) == 5.0);
  CHECK(ds.features(1, 0) == 10.0);
}

TEST_CASE("malformed and NaN cells are flagged missing") {
  const auto path = write_file("missing.csv",
                               "time,x1,x2\n"
                               "0,NaN,1\n"
                               "1,2.5,oops\n"
                               "2,,3\n");
  const auto ds = gdcpd::load_csv(path);
  CHECK(std::isnan(ds.features(0, 0)));
  CHECK(ds.features(0, 1) == 1.0);
  CHECK(ds.features(1, 0) == 2.5);
  CHECK(std::isnan(ds.features(1, 1)));
  CHECK(std::isnan(ds.features(2, 0)));
}

TEST_CASE("ingestion errors carry line numbers") {
  const auto dup = write_file("dup.csv",
                              "time,x1\n"
                              "0,1\n"
                              "5,2\n"
                              "5,3\n");
  try {
    gdcpd::load_csv(dup);
    FAIL("expected IngestError");
  } catch (const gdcpd::IngestError& e) {
    CHECK(std::string(e.what()).find("lines 3 and 4") != std::string::npos);
  }

  const auto short_row = write_file("short.csv",
                                    "time,x1,x2\n"
                                    "0,1,2\n"
                                    "1,3\n");
  try {
    gdcpd::load_csv(short_row);
    FAIL("expected IngestError");
  } catch (const gdcpd::IngestError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  CHECK_THROWS_AS(gdcpd::load_csv("/tmp/gdcpd_does_not_exist.csv"),
                  gdcpd::IngestError);
  CHECK_THROWS_AS(
      gdcpd::load_csv(write_file("no_time.csv", "stamp,x1\n0,1\n")),
      gdcpd::IngestError);
  CHECK_THROWS_AS(
      gdcpd::load_csv(write_file("no_features.csv", "time,y\n0,1\n")),
      gdcpd::IngestError);
  CHECK_THROWS_AS(
      gdcpd::load_csv(write_file("bad_time.csv", "time,x1\nzap,1\n")),
      gdcpd::IngestError);
  CHECK_THROWS_AS(
      gdcpd::load_csv(write_file("bad_y.csv", "time,y,x1\n0,2,1\n")),
      gdcpd::IngestError);
  CHECK_THROWS_AS(gdcpd::load_csv(write_file("empty.csv", "")),
                  gdcpd::IngestError);
  CHECK_THROWS_AS(gdcpd::load_csv(write_file("header_only.csv", "time,x1\n")),
                  gdcpd::IngestError);
}

TEST_CASE("interior gaps interpolate linearly in time") {
  TimeSeriesDataset ds;
  ds.timestamps = (Eigen::VectorXd(3) << 0.0, 2.0, 4.0).finished();
  ds.features.resize(3, 1);
  ds.features << 2.0, std::nan(""), 4.0;
  ds.feature_names = {"x1"};
  const auto report = gdcpd::preprocess(ds);
  CHECK(ds.features(1, 0) == 3.0);  // midpoint of 2 and 4
  CHECK(report.interpolated_cells == 1);
  CHECK(report.edge_filled_cells == 0);

  // Uneven spacing weights by time, not by index.
  TimeSeriesDataset uneven;
  uneven.timestamps = (Eigen::VectorXd(3) << 0.0, 1.0, 4.0).finished();
  uneven.features.resize(3, 1);
  uneven.features << 2.0, std::nan(""), 8.0;
  uneven.feature_names = {"x1"};
  gdcpd::preprocess(uneven);
  CHECK(uneven.features(1, 0) == 3.5);  // 2 + 6 * (1/4)
}

TEST_CASE("edge gaps copy the nearest valid value") {
  TimeSeriesDataset ds;
  ds.timestamps = (Eigen::VectorXd(5) << 0, 1, 2, 3, 4).finished();
  ds.features.resize(5, 1);
  ds.features << std::nan(""), std::nan(""), 5.0, 7.0, std::nan("");
  ds.feature_names = {"x1"};
  const auto report = gdcpd::preprocess(ds);
  CHECK(ds.features(0, 0) == 5.0);
  CHECK(ds.features(1, 0) == 5.0);
  CHECK(ds.features(4, 0) == 7.0);
  CHECK(report.edge_filled_cells == 3);
  CHECK(report.interpolated_cells == 0);
  CHECK(ds.features.allFinite());
}

TEST_CASE("a column with no usable values is dropped") {
  TimeSeriesDataset ds;
  ds.timestamps = (Eigen::VectorXd(3) << 0, 1, 2).finished();
  ds.features.resize(3, 2);
  ds.features << 1.0, std::nan(""), 2.0, std::nan(""), 3.0, std::nan("");
  ds.feature_names = {"keep", "gone"};
  const auto report = gdcpd::preprocess(ds);
  CHECK(ds.cols() == 1);
  CHECK(ds.feature_names == std::vector<std::string>{"keep"});
  CHECK(report.dropped_features == std::vector<int>{1});
  CHECK(report.dropped_names == std::vector<std::string>{"gone"});
}

TEST_CASE("a 30-minute exclusion at 2-minute cadence masks 15 rows") {
  auto ds = cadence_fixture(20, 2);  // break at t = 240 s
  const auto report = gdcpd::preprocess(ds);
  CHECK(report.excluded_rows == 15);
  CHECK_FALSE(ds.is_excluded(2));  // the break row itself stays usable
  for (int i = 3; i <= 17; ++i) CHECK(ds.is_excluded(i));
  CHECK_FALSE(ds.is_excluded(18));

  // A shorter exclusion window masks proportionally fewer rows.
  auto ds10 = cadence_fixture(20, 2);
  const auto report10 =
      gdcpd::preprocess(ds10, {.restart_exclusion = 600.0});
  CHECK(report10.excluded_rows == 5);
}

TEST_CASE("standardization centers and scales the retained columns") {
  auto ds = cadence_fixture(20, 2);
  PreprocessConfig cfg;
  cfg.standardize = true;
  gdcpd::preprocess(ds, cfg);
  REQUIRE(ds.standardization.size() == 2);

  for (Eigen::Index d = 0; d < ds.cols(); ++d) {
    double sum = 0.0;
    int m = 0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if (ds.is_excluded(i)) continue;
      sum += ds.features(i, d);
      ++m;
    }
    const double mean = sum / m;
    double sq = 0.0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if (ds.is_excluded(i)) continue;
      sq += (ds.features(i, d) - mean) * (ds.features(i, d) - mean);
    }
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq / m) - 1.0) < 1e-9);
  }
}

TEST_CASE("excluded rows never reach the standardization statistics") {
  auto clean = cadence_fixture(20, 2);
  auto poisoned = cadence_fixture(20, 2);
  gdcpd::preprocess(clean);
  gdcpd::preprocess(poisoned);
  // Poison a masked row; the fitted statistics must not move at all.
  REQUIRE(poisoned.is_excluded(5));
  poisoned.features(5, 0) = 1e9;
  poisoned.features(5, 1) = -1e9;

  const auto s_clean = gdcpd::fit_standardization(clean);
  const auto s_poisoned = gdcpd::fit_standardization(poisoned);
  CHECK(s_clean.mean == s_poisoned.mean);
  CHECK(s_clean.stddev == s_poisoned.stddev);
  CHECK(s_clean.kept == s_poisoned.kept);
}

TEST_CASE("zero-variance columns are dropped during standardization") {
  TimeSeriesDataset ds;
  ds.timestamps = (Eigen::VectorXd(4) << 0, 1, 2, 3).finished();
  ds.features.resize(4, 2);
  ds.features << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0;
  ds.feature_names = {"varies", "flat"};
  PreprocessConfig cfg;
  cfg.standardize = true;
  const auto report = gdcpd::preprocess(ds, cfg);
  CHECK(ds.cols() == 1);
  CHECK(ds.feature_names == std::vector<std::string>{"varies"});
  CHECK(report.dropped_names == std::vector<std::string>{"flat"});
  CHECK(ds.standardization.size() == 1);
}

TEST_CASE("statistics fitted on one dataset transfer to another") {
  auto train = cadence_fixture(20, 2);
  gdcpd::preprocess(train);
  const auto stats = gdcpd::fit_standardization(train);

  TimeSeriesDataset other;
  other.timestamps = (Eigen::VectorXd(2) << 0, 1).finished();
  other.features.resize(2, 2);
  other.features << 1.0, 0.5, 2.0, 0.25;
  other.feature_names = {"x1", "x2"};
  gdcpd::apply_standardization(other, stats);
  CHECK(other.features(0, 0) ==
        (1.0 - stats.mean[0]) / stats.stddev[0]);
  CHECK(other.features(1, 1) ==
        (0.25 - stats.mean[1]) / stats.stddev[1]);
  CHECK(other.standardization.size() == 2);

  TimeSeriesDataset mismatched = other;
  CHECK_THROWS_AS(gdcpd::apply_standardization(mismatched, gdcpd::StandardizationStats{}),
                  gdcpd::ShapeError);
}

TEST_CASE("standardizing with gaps present is rejected") {
  TimeSeriesDataset ds;
  ds.timestamps = (Eigen::VectorXd(3) << 0, 1, 2).finished();
  ds.features.resize(3, 1);
  ds.features << 1.0, std::nan(""), 3.0;
  ds.feature_names = {"x1"};
  CHECK_THROWS_AS(gdcpd::fit_standardization(ds), gdcpd::PreconditionError);
}

TEST_CASE("cycle ranges end on break rows") {
  const auto ds = cycles_fixture(3, 2);
  const auto ranges = ds.cycle_ranges();
  REQUIRE(ranges.size() == 3);
  CHECK(ranges[0] == std::make_pair<Eigen::Index, Eigen::Index>(0, 1));
  CHECK(ranges[1] == std::make_pair<Eigen::Index, Eigen::Index>(2, 3));
  CHECK(ranges[2] == std::make_pair<Eigen::Index, Eigen::Index>(4, 5));
}

TEST_CASE("ten cycles split 6/2/2 at cycle boundaries") {
  const auto ds = cycles_fixture(10, 0);
  const auto split = gdcpd::split_cycles(ds);
  CHECK(split.train.cycle_ranges().size() == 6);
  CHECK(split.validation.cycle_ranges().size() == 2);
  CHECK(split.test.cycle_ranges().size() == 2);
  // Portions end exactly on break rows and tile the dataset.
  CHECK(split.train.labels.back() == 1);
  CHECK(split.validation.labels.back() == 1);
  CHECK(split.train.rows() + split.validation.rows() + split.test.rows() ==
        ds.rows());
  CHECK(split.validation.timestamps(0) ==
        ds.timestamps(split.train.rows()));
}

TEST_CASE("124 cycles split 74/25/25") {
  const auto ds = cycles_fixture(124, 0);
  const auto split = gdcpd::split_cycles(ds);
  CHECK(split.train.cycle_ranges().size() == 74);
  CHECK(split.validation.cycle_ranges().size() == 25);
  CHECK(split.test.cycle_ranges().size() == 25);
}

TEST_CASE("rows after the final break stay with the test portion") {
  const auto ds = cycles_fixture(5, 3);
  const auto split = gdcpd::split_cycles(ds);
  CHECK(split.train.cycle_ranges().size() == 3);
  CHECK(split.validation.cycle_ranges().size() == 1);
  CHECK(split.test.cycle_ranges().size() == 1);
  CHECK(split.test.rows() == 2 + 3);  // one cycle plus the tail
  CHECK(split.test.labels.back() == 0);
}

TEST_CASE("too few cycles cannot be split") {
  CHECK_THROWS_AS(gdcpd::split_cycles(cycles_fixture(4, 0)),
                  gdcpd::PreconditionError);
  TimeSeriesDataset unlabeled;
  unlabeled.timestamps = (Eigen::VectorXd(3) << 0, 1, 2).finished();
  unlabeled.features = Eigen::MatrixXd::Zero(3, 1);
  unlabeled.feature_names = {"x1"};
  CHECK_THROWS_AS(gdcpd::split_cycles(unlabeled), gdcpd::PreconditionError);
}

TEST_CASE("slices keep masks and labels aligned") {
  auto ds = cadence_fixture(20, 2);
  gdcpd::preprocess(ds);
  const auto piece = ds.slice(2, 6);
  CHECK(piece.rows() == 4);
  CHECK(piece.labels == std::vector<int>{1, 0, 0, 0});
  CHECK_FALSE(piece.is_excluded(0));
  CHECK(piece.is_excluded(1));
  CHECK(piece.timestamps(0) == 240.0);
  CHECK_THROWS_AS(ds.slice(-1, 3), gdcpd::PreconditionError);
  CHECK_THROWS_AS(ds.slice(0, 21), gdcpd::PreconditionError);
}

TEST_CASE("saved datasets reload bit for bit") {
  auto ds = cadence_fixture(7, 2);
  ds.features(3, 0) = 0.1 + 0.2;  // a value without a short decimal form
  const std::string path = "/tmp/gdcpd_roundtrip.csv";
  gdcpd::save_csv(ds, path);
  const auto back = gdcpd::load_csv(path);
  CHECK(back.rows() == ds.rows());
  CHECK(back.cols() == ds.cols());
  CHECK((back.timestamps.array() == ds.timestamps.array()).all());
  CHECK((back.features.array() == ds.features.array()).all());
  CHECK(back.labels == ds.labels);
  CHECK(back.feature_names == ds.feature_names);
}

}  // TEST_SUITE
