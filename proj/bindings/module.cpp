#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdcpd/changepoint.hpp"
#include "gdcpd/gp_regression.hpp"
#include "gdcpd/kernels.hpp"
#include "gdcpd/lstm.hpp"
#include "gdcpd/mjd.hpp"
#include "gdcpd/wmd.hpp"

namespace py = pybind11;
using namespace gdcpd;

namespace {

KernelHyperparams make_hyperparams(double signal_variance, double length_scale,
                                   double noise_variance) {
  KernelHyperparams hp;
  hp.signal_variance = signal_variance;
  hp.length_scales = Eigen::VectorXd::Constant(1, length_scale);
  hp.noise_variance = noise_variance;
  return hp;
}

std::vector<Sequence> to_sequences(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>& raw) {
  std::vector<Sequence> out;
  out.reserve(raw.size());
  for (const auto& [inputs, targets] : raw) {
    Sequence seq;
    seq.inputs = inputs;
    seq.targets = targets;
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "change-point detection, boundary monitoring and remaining-life "
            "estimation";

  // ------------------------------------------------------------- kernels
  m.def(
      "rbf_eval",
      [](double t, double tp, double signal_variance, double length_scale) {
        return rbf_eval(t, tp, make_hyperparams(signal_variance, length_scale,
                                                0.0));
      },
      py::arg("t"), py::arg("tp"), py::arg("signal_variance") = 1.0,
      py::arg("length_scale") = 1.0,
      "Squared-exponential kernel value for a pair of scalar inputs.");
  m.def(
      "rbf_grad_second_arg",
      [](double t, double tp, double signal_variance, double length_scale) {
        return rbf_grad_second_arg(
            t, tp, make_hyperparams(signal_variance, length_scale, 0.0));
      },
      py::arg("t"), py::arg("tp"), py::arg("signal_variance") = 1.0,
      py::arg("length_scale") = 1.0,
      "Derivative of the kernel in its second argument.");
  m.def(
      "rbf_hessian_mixed",
      [](const Eigen::VectorXd& t, const Eigen::VectorXd& tp,
         double signal_variance, double length_scale) {
        return rbf_hessian_mixed(
            t, tp, make_hyperparams(signal_variance, length_scale, 0.0));
      },
      py::arg("t"), py::arg("tp"), py::arg("signal_variance") = 1.0,
      py::arg("length_scale") = 1.0,
      "Mixed second derivative matrix between two sets of inputs.");

  // ------------------------------------------------------- GP regression
  py::class_<GpRegressor>(m, "GpRegressor")
      .def_static(
          "fit",
          [](const Eigen::VectorXd& t, const Eigen::VectorXd& z, int restarts,
             std::uint64_t seed) {
            KernelHyperparams init;
            init.signal_variance = 1.0;
            init.length_scales = Eigen::VectorXd::Constant(1, 1.0);
            init.noise_variance = 0.1;
            GpFitOptions opts;
            opts.restarts = restarts;
            opts.seed = seed;
            return GpRegressor::fit(t, z, init, opts);
          },
          py::arg("t"), py::arg("z"), py::arg("restarts") = 3,
          py::arg("seed") = 0,
          "Fit hyperparameters by marginal likelihood with restarts.")
      .def(
          "posterior_mean",
          [](const GpRegressor& gp, const Eigen::VectorXd& query) {
            return gp.posterior_mean_cov(query).first;
          },
          py::arg("query"))
      .def(
          "derivative_mean",
          [](const GpRegressor& gp, const Eigen::VectorXd& query) {
            return gp.derivative_posterior(query).mean;
          },
          py::arg("query"))
      .def(
          "derivative_variance",
          [](const GpRegressor& gp, const Eigen::VectorXd& query) {
            return gp.derivative_posterior(query).variance;
          },
          py::arg("query"))
      .def_property_readonly("fitted_nlml", &GpRegressor::fitted_nlml);

  // ------------------------------------------------------- change points
  py::class_<ChangePointResult>(m, "ChangePointResult")
      .def_readonly("indices", &ChangePointResult::indices)
      .def_readonly("timestamps", &ChangePointResult::timestamps)
      .def_readonly("score", &ChangePointResult::score)
      .def_readonly("mean_diff", &ChangePointResult::mean_diff)
      .def_readonly("attributions", &ChangePointResult::attributions)
      .def_readonly("truncated", &ChangePointResult::truncated);
  m.def(
      "detect",
      [](const Eigen::VectorXd& timestamps, const Eigen::MatrixXd& features,
         std::optional<std::vector<int>> selected, int k, int window_a,
         std::uint64_t seed) {
        DetectOptions opts;
        opts.k_count = k;
        opts.window_a = window_a;
        opts.fit.seed = seed;
        std::vector<int> cols;
        if (selected) {
          cols = *selected;
        } else {
          for (int j = 0; j < features.cols(); ++j) cols.push_back(j);
        }
        return detect(timestamps, features, cols, opts);
      },
      py::arg("timestamps"), py::arg("features"),
      py::arg("selected") = std::nullopt, py::arg("k") = 1,
      py::arg("window_a") = 3, py::arg("seed") = 0,
      "Locate up to k change points from pooled derivative magnitudes.");

  // ----------------------------------------------------------- monitoring
  m.def("mahalanobis", &mahalanobis, py::arg("delta"), py::arg("cov_inv"));
  m.def("weighted_mahalanobis", &weighted_mahalanobis, py::arg("delta"),
        py::arg("weights"), py::arg("cov_inv"));
  m.def("estimate_cov_inv", &estimate_cov_inv, py::arg("x"),
        py::arg("ridge") = 1e-3);

  py::class_<MonitorConfig>(m, "MonitorConfig")
      .def(py::init<>())
      .def_readwrite("window_a", &MonitorConfig::window_a)
      .def_readwrite("weights", &MonitorConfig::weights)
      .def_readwrite("cov_inv", &MonitorConfig::cov_inv)
      .def_readwrite("threshold_b", &MonitorConfig::threshold_b)
      .def("validate", &MonitorConfig::validate);
  m.def("wmd_series", &wmd_series, py::arg("x"), py::arg("config"));
  m.def("offline_threshold", &offline_threshold, py::arg("segments"),
        py::arg("config"));
  m.def(
      "stopping_time",
      [](const Eigen::VectorXd& series, double threshold) {
        return stopping_time(series, threshold);
      },
      py::arg("series"), py::arg("threshold"));

  py::class_<OnlineMonitor>(m, "OnlineMonitor")
      .def(py::init<const MonitorConfig&>(), py::arg("config"))
      .def("push", &OnlineMonitor::push, py::arg("row"))
      .def_property_readonly("first_alarm", &OnlineMonitor::first_alarm)
      .def_property_readonly("samples_seen", &OnlineMonitor::samples_seen)
      .def_property_readonly("running_max", &OnlineMonitor::running_max);

  // ------------------------------------------------------------ RUL model
  py::class_<RulNetwork>(m, "RulNetwork")
      .def(py::init<int, int, int, double, std::uint64_t>(), py::arg("input"),
           py::arg("hidden"), py::arg("layers"), py::arg("dropout") = 0.0,
           py::arg("seed") = 0)
      .def("predict", &RulNetwork::predict, py::arg("inputs"))
      .def(
          "loss",
          [](const RulNetwork& net, const Eigen::MatrixXd& inputs,
             const Eigen::VectorXd& targets) {
            Sequence seq;
            seq.inputs = inputs;
            seq.targets = targets;
            return net.loss(seq);
          },
          py::arg("inputs"), py::arg("targets"))
      .def(
          "train",
          [](RulNetwork& net,
             const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>&
                 train,
             const std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>>&
                 validation,
             int epochs, double learning_rate, std::uint64_t seed) {
            TrainOptions opts;
            opts.epochs = epochs;
            opts.learning_rate = learning_rate;
            opts.seed = seed;
            const TrainReport report =
                net.train(to_sequences(train), to_sequences(validation), opts);
            py::dict out;
            out["train_loss"] = report.train_loss;
            out["val_loss"] = report.val_loss;
            out["best_epoch"] = report.best_epoch;
            out["best_val_loss"] = report.best_val_loss;
            return out;
          },
          py::arg("train"), py::arg("validation"), py::arg("epochs") = 30,
          py::arg("learning_rate") = 1e-3, py::arg("seed") = 0)
      .def_property_readonly("parameter_count", [](const RulNetwork& net) {
        return net.parameters().size();
      });
  m.def("rmse", &rmse, py::arg("predictions"), py::arg("actuals"));
  m.def("score_function", &score_function, py::arg("predictions"),
        py::arg("actuals"));

  // ------------------------------------------------------------ simulator
  m.def("scenario_names", [] {
    std::vector<std::string> names;
    for (const auto& sc : scenario_suite()) names.push_back(sc.name);
    return names;
  });
  m.def(
      "simulate_scenario",
      [](const std::string& name, std::uint64_t seed) {
        for (const auto& sc : scenario_suite())
          if (sc.name == name) {
            const MjdPath path = simulate_scenario(sc, seed);
            py::dict out;
            out["times"] = path.times;
            out["values"] = path.values;
            out["jump_times"] = path.jump_times;
            out["ground_truth"] = sc.ground_truth;
            out["window_a"] = sc.window_a;
            out["dt"] = sc.dt;
            return out;
          }
        throw std::invalid_argument("unknown scenario: " + name);
      },
      py::arg("name"), py::arg("seed") = 0,
      "Simulate one benchmark path and return it with its ground truth.");
  m.def("jnr", &jnr, py::arg("jump_rate"), py::arg("jump_mean"),
        py::arg("sigma"), "Jump-to-noise ratio.");
}
