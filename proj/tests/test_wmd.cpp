#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "gdcpd/errors.hpp"
#include "gdcpd/rng.hpp"
#include "gdcpd/wmd.hpp"

using gdcpd::MonitorConfig;
using gdcpd::OnlineMonitor;
using gdcpd::PreconditionError;
using gdcpd::ShapeError;
using gdcpd::StreamRng;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

MonitorConfig scalar_config(int window_a, double threshold) {
  MonitorConfig cfg;
  cfg.window_a = window_a;
  cfg.weights = Eigen::VectorXd::Ones(1);
  cfg.cov_inv = Eigen::MatrixXd::Identity(1, 1);
  cfg.threshold_b = threshold;
  return cfg;
}

}  // namespace

TEST_SUITE("wmd") {

TEST_CASE("mahalanobis with identity precision is the euclidean norm") {
  CHECK(gdcpd::mahalanobis(vec2(3.0, 4.0), Eigen::MatrixXd::Identity(2, 2)) ==
        5.0);
}

TEST_CASE("mahalanobis against a correlated covariance") {
  // Covariance [[1, .5], [.5, 1]] has inverse (1/0.75) * [[1, -.5], [-.5, 1]];
  // at delta = (1, 1) the quadratic form is 4/3.
  Eigen::MatrixXd cov_inv(2, 2);
  cov_inv << 4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0;
  const double d = gdcpd::mahalanobis(vec2(1.0, 1.0), cov_inv);
  CHECK(d == doctest::Approx(1.1547005383792515).epsilon(1e-12));
}

TEST_CASE("unit weights reduce the weighted form to the plain one") {
  StreamRng rng(5, 0);
  Eigen::VectorXd delta(3);
  for (int i = 0; i < 3; ++i) delta(i) = rng.normal();
  Eigen::MatrixXd m(3, 3);
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = rng.normal();
  const Eigen::MatrixXd cov_inv =
      m * m.transpose() + Eigen::MatrixXd::Identity(3, 3);
  CHECK(gdcpd::weighted_mahalanobis(delta, Eigen::VectorXd::Ones(3), cov_inv) ==
        gdcpd::mahalanobis(delta, cov_inv));
}

TEST_CASE("weights rescale coordinates before the quadratic form") {
  // w = (2, 0) zeroes the second coordinate: distance is 2 * |delta_0|.
  CHECK(gdcpd::weighted_mahalanobis(vec2(3.0, 4.0), vec2(2.0, 0.0),
                                    Eigen::MatrixXd::Identity(2, 2)) == 6.0);
}

TEST_CASE("derivative weights normalize mean absolute derivatives") {
  Eigen::MatrixXd g(2, 2);
  g << 1.0, -3.0, -1.0, 3.0;
  const Eigen::VectorXd w = gdcpd::derivative_weights(g);
  CHECK(w(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w(1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-15));

  SUBCASE("scaling the derivatives leaves the weights unchanged") {
    const Eigen::VectorXd w7 = gdcpd::derivative_weights(7.0 * g);
    CHECK(w7.isApprox(w, 1e-14));
  }
  SUBCASE("an all-zero derivative field is rejected") {
    CHECK_THROWS_AS(gdcpd::derivative_weights(Eigen::MatrixXd::Zero(3, 2)),
                    PreconditionError);
  }
}

TEST_CASE("covariance inverse satisfies its defining identity") {
  StreamRng rng(31, 0);
  Eigen::MatrixXd x(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal(0.0, 1.0 + j);
  const double ridge = 1e-3;
  const Eigen::MatrixXd inv = gdcpd::estimate_cov_inv(x, ridge);

  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = centered.transpose() * centered / 39.0;
  cov.diagonal().array() += ridge;
  CHECK((inv * cov - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("ridge keeps degenerate columns invertible") {
  Eigen::MatrixXd x(4, 2);
  x << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0, 4.0, 5.0;  // constant second column
  const Eigen::MatrixXd inv = gdcpd::estimate_cov_inv(x, 1e-3);
  CHECK(inv(1, 1) == doctest::Approx(1000.0).epsilon(1e-9));

  SUBCASE("without the ridge the duplicate geometry is rejected") {
    Eigen::MatrixXd dup(4, 2);
    dup.col(0) << 1.0, 2.0, 3.0, 4.0;
    dup.col(1) = dup.col(0);
    CHECK_THROWS_AS(gdcpd::estimate_cov_inv(dup, 0.0), gdcpd::NumericalError);
  }
}

TEST_CASE("offline threshold averages the per-segment maxima") {
  // Scalar process, window 1: segment one peaks at |4 - 0| = 4, segment two
  // at |6 - 0| = 6, so the threshold lands exactly on 5.
  const MonitorConfig cfg = scalar_config(1, 0.0);
  Eigen::MatrixXd seg1(4, 1), seg2(4, 1);
  seg1 << 0.0, 0.0, 4.0, 4.0;
  seg2 << 0.0, 0.0, 6.0, 6.0;
  CHECK(gdcpd::offline_threshold({seg1, seg2}, cfg) == 5.0);
  CHECK_THROWS_AS(gdcpd::offline_threshold({}, cfg), PreconditionError);
}

TEST_CASE("wmd series covers every interior boundary") {
  const MonitorConfig cfg = scalar_config(2, 0.0);
  Eigen::MatrixXd x(7, 1);
  x << 0.0, 0.0, 0.0, 0.0, 8.0, 8.0, 8.0;
  const Eigen::VectorXd s = gdcpd::wmd_series(x, cfg);
  REQUIRE(s.size() == 4);  // boundaries k = 2, 3, 4, 5
  CHECK(s(0) == 0.0);      // windows {0,1} vs {2,3}
  CHECK(s(1) == 4.0);      // {0,0} vs {0,8}
  CHECK(s(2) == 8.0);      // {0,0} vs {8,8}
  CHECK(s(3) == 4.0);      // {0,8} vs {8,8}
}

TEST_CASE("stopping time is the first crossing, boundary included") {
  Eigen::VectorXd s(4);
  s << 1.0, 3.0, 9.0, 2.0;
  auto hit = gdcpd::stopping_time(s, 5.0);
  REQUIRE(hit.has_value());
  CHECK(*hit == 2);
  CHECK_FALSE(gdcpd::stopping_time(s, 100.0).has_value());

  // Reaching the threshold exactly already counts as a crossing.
  Eigen::VectorXd flat(3);
  flat << 5.0, 5.0, 6.0;
  CHECK(*gdcpd::stopping_time(flat, 5.0) == 0);

  // A zero threshold alarms on the very first emitted value.
  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(3);
  CHECK(*gdcpd::stopping_time(zeros, 0.0) == 0);
}

TEST_CASE("online replay matches the offline series bit for bit") {
  const int n = 40;
  StreamRng rng(77, 0);
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j)
      x(i, j) = rng.normal() + (i >= 28 ? 1.5 * (j + 1) : 0.0);

  Eigen::MatrixXd healthy(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 3; ++j) healthy(i, j) = rng.normal();

  MonitorConfig cfg;
  cfg.window_a = 4;
  cfg.weights = vec2(0.2, 0.3).homogeneous();  // (0.2, 0.3, 1.0)
  cfg.cov_inv = gdcpd::estimate_cov_inv(healthy);
  cfg.threshold_b = 1.0;

  const Eigen::VectorXd offline = gdcpd::wmd_series(x, cfg);

  OnlineMonitor monitor(cfg);
  std::vector<double> emitted;
  for (int i = 0; i < n; ++i) {
    const auto v = monitor.push(x.row(i).transpose());
    if (i < 2 * cfg.window_a - 1) {
      CHECK_FALSE(v.has_value());
    } else {
      REQUIRE(v.has_value());
      emitted.push_back(*v);
    }
  }

  REQUIRE(static_cast<int>(emitted.size()) == offline.size());
  for (int i = 0; i < offline.size(); ++i) CHECK(emitted[i] == offline(i));

  SUBCASE("alarm index agrees with the offline stopping time") {
    const auto offline_hit = gdcpd::stopping_time(offline, cfg.threshold_b);
    REQUIRE(offline_hit.has_value());
    REQUIRE(monitor.first_alarm().has_value());
    CHECK(*monitor.first_alarm() == *offline_hit + cfg.window_a);
  }
  SUBCASE("running max matches the offline maximum") {
    CHECK(monitor.running_max() == offline.maxCoeff());
  }
}

TEST_CASE("online monitor reports per-feature contributions") {
  MonitorConfig cfg;
  cfg.window_a = 1;
  cfg.weights = vec2(1.0, 2.0);
  cfg.cov_inv = Eigen::MatrixXd::Identity(2, 2);
  cfg.threshold_b = 100.0;

  OnlineMonitor monitor(cfg);
  CHECK_FALSE(monitor.push(vec2(0.0, 0.0)).has_value());
  const auto v = monitor.push(vec2(3.0, -4.0));
  REQUIRE(v.has_value());
  CHECK(monitor.contributions()(0) == 3.0);
  CHECK(monitor.contributions()(1) == 8.0);
  CHECK_FALSE(monitor.first_alarm().has_value());
}

TEST_CASE("alarm fires at the first boundary above the threshold") {
  OnlineMonitor monitor(scalar_config(1, 2.5));
  Eigen::VectorXd x(1);
  x << 0.0;
  monitor.push(x);
  x << 1.0;
  monitor.push(x);  // boundary 1, statistic 1
  CHECK_FALSE(monitor.first_alarm().has_value());
  x << 5.0;
  monitor.push(x);  // boundary 2, statistic 4
  REQUIRE(monitor.first_alarm().has_value());
  CHECK(*monitor.first_alarm() == 2);
  CHECK(monitor.running_max() == 4.0);

  SUBCASE("the first alarm is sticky") {
    x << 50.0;
    monitor.push(x);
    CHECK(*monitor.first_alarm() == 2);
  }
}

TEST_CASE("configuration and input validation") {
  MonitorConfig cfg;
  cfg.window_a = 0;
  cfg.weights = Eigen::VectorXd::Ones(1);
  cfg.cov_inv = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.window_a = 2;
  cfg.weights = Eigen::VectorXd();
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.weights = vec2(0.5, 0.5);
  CHECK_THROWS_AS(cfg.validate(), ShapeError);  // 1x1 precision, 2 weights
  cfg.cov_inv = Eigen::MatrixXd::Identity(2, 2);
  CHECK_NOTHROW(cfg.validate());
  cfg.weights = vec2(-0.5, 0.5);
  CHECK_THROWS_AS(cfg.validate(), std::domain_error);
  cfg.weights = vec2(0.0, 0.0);
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.weights = vec2(0.5, 0.5);
  cfg.threshold_b = -1.0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);

  CHECK_THROWS_AS(
      gdcpd::mahalanobis(vec2(1.0, 2.0), Eigen::MatrixXd::Identity(3, 3)),
      ShapeError);
  CHECK_THROWS_AS(gdcpd::weighted_mahalanobis(
                      vec2(1.0, 2.0), Eigen::VectorXd::Ones(3),
                      Eigen::MatrixXd::Identity(2, 2)),
                  ShapeError);
  CHECK_THROWS_AS(gdcpd::estimate_cov_inv(Eigen::MatrixXd::Zero(1, 2), 1e-3),
                  PreconditionError);

  MonitorConfig ok = scalar_config(2, 0.0);
  CHECK_THROWS_AS(gdcpd::wmd_series(Eigen::MatrixXd::Zero(3, 1), ok),
                  PreconditionError);
  CHECK_THROWS_AS(gdcpd::wmd_series(Eigen::MatrixXd::Zero(8, 2), ok),
                  ShapeError);
  OnlineMonitor monitor(ok);
  CHECK_THROWS_AS(monitor.push(vec2(1.0, 2.0)), ShapeError);
}

}  // TEST_SUITE
