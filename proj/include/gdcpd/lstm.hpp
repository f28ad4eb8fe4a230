#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <limits>
#include <utility>
#include <vector>

namespace gdcpd {

// One labeled sequence: rows of `inputs` are timesteps, `targets` holds the
// per-step regression target (normalized remaining life).
struct Sequence {
  Eigen::MatrixXd inputs;   // T x F
  Eigen::VectorXd targets;  // T
};

struct TrainOptions {
  int epochs = 30;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::vector<double> train_loss;  // mean per-sequence loss, by epoch
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Stacked LSTM regressor with inter-layer inverted dropout and a per-step
// affine head, trained by backpropagation through time with Adam updates.
// All parameters live in one flat vector; structured views are mapped on
// demand, which keeps the optimizer and the finite-difference harness
// trivial.
class RulNetwork {
 public:
  RulNetwork() = default;
  RulNetwork(int input_size, int hidden_size, int num_layers, double dropout,
             std::uint64_t seed);

  int input_size() const { return input_size_; }
  int hidden_size() const { return hidden_; }
  int num_layers() const { return layers_; }
  double dropout() const { return dropout_; }

  Eigen::Index parameter_count() const { return theta_.size(); }
  const Eigen::VectorXd& parameters() const { return theta_; }
  void set_parameters(const Eigen::VectorXd& theta);

  // One cell step of the given layer: gate equations with logistic gates and
  // tanh activations. Returns (h_t, c_t).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> cell_forward(
      const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
      const Eigen::VectorXd& c_prev, int layer) const;

  // Deterministic inference pass (dropout off).
  Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const;

  // Mean-squared-error loss of the current parameters on one sequence.
  double loss(const Sequence& seq) const;

  // Loss plus d(loss)/d(parameters). With use_dropout the masks are drawn
  // deterministically from mask_seed, so repeated calls are identical.
  double loss_with_gradient(const Sequence& seq, Eigen::VectorXd& grad,
                            bool use_dropout = false,
                            std::uint64_t mask_seed = 0) const;

  // Adam over per-sequence gradients, order reshuffled each epoch. Keeps the
  // parameter snapshot with the lowest validation loss.
  TrainReport train(const std::vector<Sequence>& train_set,
                    const std::vector<Sequence>& val_set,
                    const TrainOptions& opts = {});

  // Short fine-tune on one segment at a reduced learning rate; this network
  // is left untouched.
  RulNetwork calibrated(const Sequence& segment, const TrainOptions& base = {},
                        int epochs = 5, double lr_scale = 0.1) const;

  nlohmann::json to_json() const;
  static RulNetwork from_json(const nlohmann::json& j);

 private:
  struct Cache;

  void build_offsets();
  void check_ready() const;
  int layer_input(int layer) const {
    return layer == 0 ? input_size_ : hidden_;
  }
  void run_forward(const Eigen::MatrixXd& inputs, bool use_dropout,
                   std::uint64_t mask_seed, std::vector<Cache>& caches,
                   std::vector<Eigen::MatrixXd>& masks,
                   Eigen::VectorXd& preds) const;
  // One pass over the set in shuffled order with Adam updates; returns the
  // mean pre-update loss. The optimizer state lives with the caller so it
  // spans epochs.
  double run_epoch(const std::vector<Sequence>& set, const TrainOptions& opts,
                   int epoch, Eigen::VectorXd& m, Eigen::VectorXd& v,
                   long& step);

  int input_size_ = 0;
  int hidden_ = 0;
  int layers_ = 0;
  double dropout_ = 0.0;
  Eigen::VectorXd theta_;

  // Flat-vector offsets: per layer [wfx, wfh, bf, wix, wih, bi, wcx, wch,
  // bc, wox, woh, bo], then the head.
  std::vector<std::array<std::size_t, 12>> layer_off_;
  std::size_t head_w_off_ = 0, head_b_off_ = 0, total_ = 0;
};

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

// Asymmetric prognostics score, averaged over points: exp(-d/13)-1 for
// d < 0 and exp(d/10)-1 otherwise, with d = pred - actual, so late
// predictions cost more than early ones.
double score_function(const Eigen::VectorXd& pred,
                      const Eigen::VectorXd& actual);

}  // namespace gdcpd
