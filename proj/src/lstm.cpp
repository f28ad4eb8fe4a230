#include "gdcpd/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gdcpd/errors.hpp"
#include "gdcpd/rng.hpp"

namespace gdcpd {

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd logistic_vec(const Eigen::VectorXd& x) {
  return x.unaryExpr([](double v) { return logistic(v); });
}

void check_sequence(const Sequence& seq, int input_size) {
  if (seq.inputs.rows() < 1)
    throw PreconditionError("sequence is empty");
  if (seq.inputs.cols() != input_size)
    throw ShapeError("sequence width does not match the network input size");
  if (seq.targets.size() != seq.inputs.rows())
    throw ShapeError("targets do not match the sequence length");
  if (!seq.inputs.allFinite() || !seq.targets.allFinite())
    throw std::domain_error("sequence contains non-finite values");
}

}  // namespace

struct RulNetwork::Cache {
  Eigen::MatrixXd x;  // layer input actually fed (post-dropout), I x T
  Eigen::MatrixXd f, i, g, o, c, tc, h;  // H x T each
};

void RulNetwork::build_offsets() {
  layer_off_.assign(static_cast<std::size_t>(layers_), {});
  std::size_t off = 0;
  const auto grab = [&off](std::size_t n) {
    const std::size_t at = off;
    off += n;
    return at;
  };
  const auto h = static_cast<std::size_t>(hidden_);
  for (int l = 0; l < layers_; ++l) {
    const auto in = static_cast<std::size_t>(layer_input(l));
    for (int gate = 0; gate < 4; ++gate) {
      layer_off_[l][3 * gate + 0] = grab(h * in);  // wx
      layer_off_[l][3 * gate + 1] = grab(h * h);   // wh
      layer_off_[l][3 * gate + 2] = grab(h);       // b
    }
  }
  head_w_off_ = grab(h);
  head_b_off_ = grab(1);
  total_ = off;
}

RulNetwork::RulNetwork(int input_size, int hidden_size, int num_layers,
                       double dropout, std::uint64_t seed)
    : input_size_(input_size),
      hidden_(hidden_size),
      layers_(num_layers),
      dropout_(dropout) {
  if (input_size < 1 || hidden_size < 1 || num_layers < 1)
    throw PreconditionError("network dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw PreconditionError("dropout must lie in [0, 1)");
  build_offsets();
  theta_.setZero(static_cast<Eigen::Index>(total_));

  StreamRng rng(seed, 0);
  const auto fill_uniform = [&](std::size_t off, std::size_t n,
                                double bound) {
    for (std::size_t k = 0; k < n; ++k)
      theta_(static_cast<Eigen::Index>(off + k)) =
          (2.0 * rng.uniform() - 1.0) * bound;
  };
  const auto h = static_cast<std::size_t>(hidden_);
  for (int l = 0; l < layers_; ++l) {
    const auto in = static_cast<std::size_t>(layer_input(l));
    const double bx = 1.0 / std::sqrt(static_cast<double>(in));
    const double bh = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (int gate = 0; gate < 4; ++gate) {
      fill_uniform(layer_off_[l][3 * gate + 0], h * in, bx);
      fill_uniform(layer_off_[l][3 * gate + 1], h * h, bh);
      // biases start at zero, except the forget gate's, which starts open
      if (gate == 0)
        for (std::size_t k = 0; k < h; ++k)
          theta_(static_cast<Eigen::Index>(layer_off_[l][2] + k)) = 1.0;
    }
  }
  fill_uniform(head_w_off_, h, 1.0 / std::sqrt(static_cast<double>(hidden_)));
}

void RulNetwork::check_ready() const {
  if (theta_.size() == 0)
    throw PreconditionError("network has not been initialized");
}

void RulNetwork::set_parameters(const Eigen::VectorXd& theta) {
  check_ready();
  if (theta.size() != theta_.size())
    throw ShapeError("parameter vector has the wrong length");
  if (!theta.allFinite())
    throw std::domain_error("parameter vector has non-finite values");
  theta_ = theta;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> RulNetwork::cell_forward(
    const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
    const Eigen::VectorXd& c_prev, int layer) const {
  check_ready();
  if (layer < 0 || layer >= layers_)
    throw PreconditionError("layer index out of range");
  if (x.size() != layer_input(layer) || h_prev.size() != hidden_ ||
      c_prev.size() != hidden_)
    throw ShapeError("cell state shapes are inconsistent");

  const auto& off = layer_off_[static_cast<std::size_t>(layer)];
  const auto in = static_cast<Eigen::Index>(x.size());
  const double* base = theta_.data();
  const auto wx = [&](int gate) {
    return Eigen::Map<const Eigen::MatrixXd>(base + off[3 * gate], hidden_,
                                             in);
  };
  const auto wh = [&](int gate) {
    return Eigen::Map<const Eigen::MatrixXd>(base + off[3 * gate + 1],
                                             hidden_, hidden_);
  };
  const auto b = [&](int gate) {
    return Eigen::Map<const Eigen::VectorXd>(base + off[3 * gate + 2],
                                             hidden_);
  };

  const Eigen::VectorXd f = logistic_vec(wx(0) * x + wh(0) * h_prev + b(0));
  const Eigen::VectorXd i = logistic_vec(wx(1) * x + wh(1) * h_prev + b(1));
  const Eigen::VectorXd g =
      (wx(2) * x + wh(2) * h_prev + b(2)).array().tanh().matrix();
  const Eigen::VectorXd o = logistic_vec(wx(3) * x + wh(3) * h_prev + b(3));
  Eigen::VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Eigen::VectorXd h = o.cwiseProduct(c.array().tanh().matrix());
  return {std::move(h), std::move(c)};
}

void RulNetwork::run_forward(const Eigen::MatrixXd& inputs, bool use_dropout,
                             std::uint64_t mask_seed,
                             std::vector<Cache>& caches,
                             std::vector<Eigen::MatrixXd>& masks,
                             Eigen::VectorXd& preds) const {
  const auto t_len = inputs.rows();
  const bool dropping = use_dropout && dropout_ > 0.0 && layers_ > 1;

  caches.assign(static_cast<std::size_t>(layers_), Cache{});
  masks.assign(dropping ? static_cast<std::size_t>(layers_ - 1) : 0,
               Eigen::MatrixXd());
  if (dropping) {
    const double keep = 1.0 - dropout_;
    for (int boundary = 0; boundary < layers_ - 1; ++boundary) {
      StreamRng rng(mask_seed, static_cast<std::uint64_t>(boundary));
      Eigen::MatrixXd& m = masks[static_cast<std::size_t>(boundary)];
      m.resize(hidden_, t_len);
      for (Eigen::Index t = 0; t < t_len; ++t)
        for (Eigen::Index u = 0; u < hidden_; ++u)
          m(u, t) = rng.uniform() < dropout_ ? 0.0 : 1.0 / keep;
    }
  }

  const double* base = theta_.data();
  for (int l = 0; l < layers_; ++l) {
    Cache& cache = caches[static_cast<std::size_t>(l)];
    const auto in = static_cast<Eigen::Index>(layer_input(l));
    cache.x.resize(in, t_len);
    if (l == 0) {
      cache.x = inputs.transpose();
    } else {
      cache.x = caches[static_cast<std::size_t>(l - 1)].h;
      if (dropping)
        cache.x.array() *= masks[static_cast<std::size_t>(l - 1)].array();
    }

    const auto& off = layer_off_[static_cast<std::size_t>(l)];
    const Eigen::Map<const Eigen::MatrixXd> wfx(base + off[0], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wfh(base + off[1], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::VectorXd> bf(base + off[2], hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wix(base + off[3], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wih(base + off[4], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::VectorXd> bi(base + off[5], hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wcx(base + off[6], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wch(base + off[7], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::VectorXd> bc(base + off[8], hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wox(base + off[9], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> woh(base + off[10], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::VectorXd> bo(base + off[11], hidden_);

    cache.f.resize(hidden_, t_len);
    cache.i.resize(hidden_, t_len);
    cache.g.resize(hidden_, t_len);
    cache.o.resize(hidden_, t_len);
    cache.c.resize(hidden_, t_len);
    cache.tc.resize(hidden_, t_len);
    cache.h.resize(hidden_, t_len);

    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(hidden_);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const auto x_t = cache.x.col(t);
      cache.f.col(t) = logistic_vec(wfx * x_t + wfh * h_prev + bf);
      cache.i.col(t) = logistic_vec(wix * x_t + wih * h_prev + bi);
      cache.g.col(t) = (wcx * x_t + wch * h_prev + bc).array().tanh().matrix();
      cache.o.col(t) = logistic_vec(wox * x_t + woh * h_prev + bo);
      cache.c.col(t) = cache.f.col(t).cwiseProduct(c_prev) +
                       cache.i.col(t).cwiseProduct(cache.g.col(t));
      cache.tc.col(t) = cache.c.col(t).array().tanh().matrix();
      cache.h.col(t) = cache.o.col(t).cwiseProduct(cache.tc.col(t));
      h_prev = cache.h.col(t);
      c_prev = cache.c.col(t);
    }
  }

  const Eigen::Map<const Eigen::VectorXd> head_w(base + head_w_off_, hidden_);
  const double head_b = theta_(static_cast<Eigen::Index>(head_b_off_));
  const Cache& top = caches[static_cast<std::size_t>(layers_ - 1)];
  preds = ((top.h.transpose() * head_w).array() + head_b).matrix();
}

Eigen::VectorXd RulNetwork::predict(const Eigen::MatrixXd& inputs) const {
  check_ready();
  if (inputs.rows() < 1) throw PreconditionError("empty input sequence");
  if (inputs.cols() != input_size_)
    throw ShapeError("input width does not match the network");
  if (!inputs.allFinite())
    throw std::domain_error("inputs contain non-finite values");
  std::vector<Cache> caches;
  std::vector<Eigen::MatrixXd> masks;
  Eigen::VectorXd preds;
  run_forward(inputs, false, 0, caches, masks, preds);
  return preds;
}

double RulNetwork::loss(const Sequence& seq) const {
  check_ready();
  check_sequence(seq, input_size_);
  const Eigen::VectorXd preds = predict(seq.inputs);
  const double inv_t = 1.0 / static_cast<double>(seq.targets.size());
  return (preds - seq.targets).squaredNorm() * inv_t;
}

double RulNetwork::loss_with_gradient(const Sequence& seq,
                                      Eigen::VectorXd& grad, bool use_dropout,
                                      std::uint64_t mask_seed) const {
  check_ready();
  check_sequence(seq, input_size_);

  std::vector<Cache> caches;
  std::vector<Eigen::MatrixXd> masks;
  Eigen::VectorXd preds;
  run_forward(seq.inputs, use_dropout, mask_seed, caches, masks, preds);

  const auto t_len = seq.inputs.rows();
  const double inv_t = 1.0 / static_cast<double>(t_len);
  const Eigen::VectorXd residual = preds - seq.targets;
  const double loss_value = residual.squaredNorm() * inv_t;
  const Eigen::VectorXd dy = 2.0 * inv_t * residual;

  grad.setZero(static_cast<Eigen::Index>(total_));
  double* gbase = grad.data();
  const double* base = theta_.data();

  // Head.
  const Cache& top = caches[static_cast<std::size_t>(layers_ - 1)];
  Eigen::Map<Eigen::VectorXd>(gbase + head_w_off_, hidden_) = top.h * dy;
  grad(static_cast<Eigen::Index>(head_b_off_)) = dy.sum();

  const Eigen::Map<const Eigen::VectorXd> head_w(base + head_w_off_, hidden_);
  Eigen::MatrixXd dh_above = head_w * dy.transpose();  // H x T

  const bool dropping = use_dropout && dropout_ > 0.0 && layers_ > 1;
  for (int l = layers_ - 1; l >= 0; --l) {
    const Cache& cache = caches[static_cast<std::size_t>(l)];
    const auto in = static_cast<Eigen::Index>(layer_input(l));
    const auto& off = layer_off_[static_cast<std::size_t>(l)];

    const Eigen::Map<const Eigen::MatrixXd> wfx(base + off[0], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wfh(base + off[1], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wix(base + off[3], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wih(base + off[4], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wcx(base + off[6], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> wch(base + off[7], hidden_,
                                                hidden_);
    const Eigen::Map<const Eigen::MatrixXd> wox(base + off[9], hidden_, in);
    const Eigen::Map<const Eigen::MatrixXd> woh(base + off[10], hidden_,
                                                hidden_);

    Eigen::Map<Eigen::MatrixXd> gwfx(gbase + off[0], hidden_, in);
    Eigen::Map<Eigen::MatrixXd> gwfh(gbase + off[1], hidden_, hidden_);
    Eigen::Map<Eigen::VectorXd> gbf(gbase + off[2], hidden_);
    Eigen::Map<Eigen::MatrixXd> gwix(gbase + off[3], hidden_, in);
    Eigen::Map<Eigen::MatrixXd> gwih(gbase + off[4], hidden_, hidden_);
    Eigen::Map<Eigen::VectorXd> gbi(gbase + off[5], hidden_);
    Eigen::Map<Eigen::MatrixXd> gwcx(gbase + off[6], hidden_, in);
    Eigen::Map<Eigen::MatrixXd> gwch(gbase + off[7], hidden_, hidden_);
    Eigen::Map<Eigen::VectorXd> gbc(gbase + off[8], hidden_);
    Eigen::Map<Eigen::MatrixXd> gwox(gbase + off[9], hidden_, in);
    Eigen::Map<Eigen::MatrixXd> gwoh(gbase + off[10], hidden_, hidden_);
    Eigen::Map<Eigen::VectorXd> gbo(gbase + off[11], hidden_);

    Eigen::MatrixXd dx(in, t_len);
    Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(hidden_);
    Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(hidden_);
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const Eigen::VectorXd dh = dh_above.col(t) + dh_rec;
      const auto f = cache.f.col(t);
      const auto i = cache.i.col(t);
      const auto g = cache.g.col(t);
      const auto o = cache.o.col(t);
      const auto tc = cache.tc.col(t);

      const Eigen::VectorXd da_o = dh.cwiseProduct(tc).cwiseProduct(o).cwiseProduct(
          (1.0 - o.array()).matrix());
      const Eigen::VectorXd dc =
          dc_rec + dh.cwiseProduct(o).cwiseProduct(
                       (1.0 - tc.array().square()).matrix());
      const Eigen::VectorXd c_prev =
          t == 0 ? Eigen::VectorXd::Zero(hidden_)
                 : Eigen::VectorXd(cache.c.col(t - 1));
      const Eigen::VectorXd da_f = dc.cwiseProduct(c_prev)
                                       .cwiseProduct(f)
                                       .cwiseProduct((1.0 - f.array()).matrix());
      const Eigen::VectorXd da_i = dc.cwiseProduct(g).cwiseProduct(i).cwiseProduct(
          (1.0 - i.array()).matrix());
      const Eigen::VectorXd da_g = dc.cwiseProduct(i).cwiseProduct(
          (1.0 - g.array().square()).matrix());

      const Eigen::VectorXd h_prev =
          t == 0 ? Eigen::VectorXd::Zero(hidden_)
                 : Eigen::VectorXd(cache.h.col(t - 1));
      const auto x_t = cache.x.col(t);

      gwfx.noalias() += da_f * x_t.transpose();
      gwfh.noalias() += da_f * h_prev.transpose();
      gbf += da_f;
      gwix.noalias() += da_i * x_t.transpose();
      gwih.noalias() += da_i * h_prev.transpose();
      gbi += da_i;
      gwcx.noalias() += da_g * x_t.transpose();
      gwch.noalias() += da_g * h_prev.transpose();
      gbc += da_g;
      gwox.noalias() += da_o * x_t.transpose();
      gwoh.noalias() += da_o * h_prev.transpose();
      gbo += da_o;

      dx.col(t) = wfx.transpose() * da_f + wix.transpose() * da_i +
                  wcx.transpose() * da_g + wox.transpose() * da_o;
      dh_rec = wfh.transpose() * da_f + wih.transpose() * da_i +
               wch.transpose() * da_g + woh.transpose() * da_o;
      dc_rec = dc.cwiseProduct(f);
    }

    if (l > 0) {
      dh_above = dx;
      if (dropping)
        dh_above.array() *= masks[static_cast<std::size_t>(l - 1)].array();
    }
  }
  return loss_value;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, StreamRng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

double RulNetwork::run_epoch(const std::vector<Sequence>& set,
                             const TrainOptions& opts, int epoch,
                             Eigen::VectorXd& m, Eigen::VectorXd& v,
                             long& step) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  StreamRng shuffle_rng(opts.seed, 0xA11CE ^ static_cast<std::uint64_t>(epoch));
  shuffle_indices(order, shuffle_rng);

  Eigen::VectorXd grad;
  double total = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::uint64_t mask_seed =
        mix64(opts.seed ^ mix64(static_cast<std::uint64_t>(epoch) * 0x10001 +
                                order[pos] + 1));
    const double value = loss_with_gradient(set[order[pos]], grad,
                                            dropout_ > 0.0, mask_seed);
    if (!std::isfinite(value))
      throw TrainingError("loss became non-finite at epoch " +
                          std::to_string(epoch));
    total += value;

    if (opts.clip_norm > 0.0) {
      const double norm = grad.norm();
      if (norm > opts.clip_norm) grad *= opts.clip_norm / norm;
    }
    ++step;
    m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
    v.array() =
        opts.beta2 * v.array() + (1.0 - opts.beta2) * grad.array().square();
    const double mc = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
    const double vc = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
    theta_.array() -= opts.learning_rate * (m.array() / mc) /
                      ((v.array() / vc).sqrt() + opts.epsilon);
  }
  return total / static_cast<double>(set.size());
}

TrainReport RulNetwork::train(const std::vector<Sequence>& train_set,
                              const std::vector<Sequence>& val_set,
                              const TrainOptions& opts) {
  check_ready();
  if (train_set.empty() || val_set.empty())
    throw PreconditionError("training and validation sets must be non-empty");
  if (opts.epochs < 1) throw PreconditionError("need at least one epoch");
  for (const Sequence& s : train_set) check_sequence(s, input_size_);
  for (const Sequence& s : val_set) check_sequence(s, input_size_);

  const auto val_loss = [&]() {
    double total = 0.0;
    for (const Sequence& s : val_set) total += loss(s);
    return total / static_cast<double>(val_set.size());
  };

  TrainReport report;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta_.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta_.size());
  long step = 0;
  Eigen::VectorXd best_theta = theta_;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    report.train_loss.push_back(run_epoch(train_set, opts, epoch, m, v, step));
    const double vl = val_loss();
    if (!std::isfinite(vl))
      throw TrainingError("validation loss became non-finite at epoch " +
                          std::to_string(epoch));
    report.val_loss.push_back(vl);
    if (vl < report.best_val_loss) {
      report.best_val_loss = vl;
      report.best_epoch = epoch;
      best_theta = theta_;
    }
  }
  theta_ = best_theta;
  return report;
}

RulNetwork RulNetwork::calibrated(const Sequence& segment,
                                  const TrainOptions& base, int epochs,
                                  double lr_scale) const {
  check_ready();
  check_sequence(segment, input_size_);
  if (epochs < 0) throw PreconditionError("negative calibration epochs");

  RulNetwork tuned = *this;
  TrainOptions opts = base;
  opts.learning_rate = base.learning_rate * lr_scale;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta_.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta_.size());
  long step = 0;
  const std::vector<Sequence> set{segment};
  for (int epoch = 0; epoch < epochs; ++epoch)
    tuned.run_epoch(set, opts, epoch, m, v, step);
  return tuned;
}

nlohmann::json RulNetwork::to_json() const {
  check_ready();
  nlohmann::json j;
  j["schema"] = "gdcpd.rul_network/1";
  j["input_size"] = input_size_;
  j["hidden_size"] = hidden_;
  j["num_layers"] = layers_;
  j["dropout"] = dropout_;
  j["parameters"] = std::vector<double>(theta_.begin(), theta_.end());
  return j;
}

RulNetwork RulNetwork::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != "gdcpd.rul_network/1")
    throw IngestError("unsupported rul_network schema: " +
                      j.value("schema", "<missing>"));
  RulNetwork net;
  net.input_size_ = j.at("input_size").get<int>();
  net.hidden_ = j.at("hidden_size").get<int>();
  net.layers_ = j.at("num_layers").get<int>();
  net.dropout_ = j.at("dropout").get<double>();
  if (net.input_size_ < 1 || net.hidden_ < 1 || net.layers_ < 1 ||
      !(net.dropout_ >= 0.0 && net.dropout_ < 1.0))
    throw IngestError("invalid rul_network dimensions");
  net.build_offsets();
  const auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != net.total_)
    throw IngestError("rul_network parameter count mismatch");
  net.theta_ =
      Eigen::Map<const Eigen::VectorXd>(params.data(),
                                        static_cast<Eigen::Index>(params.size()));
  if (!net.theta_.allFinite())
    throw IngestError("rul_network parameters are non-finite");
  return net;
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size())
    throw ShapeError("rmse inputs have different lengths");
  if (pred.size() == 0) throw PreconditionError("rmse of empty vectors");
  return std::sqrt((pred - actual).squaredNorm() /
                   static_cast<double>(pred.size()));
}

double score_function(const Eigen::VectorXd& pred,
                      const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size())
    throw ShapeError("score inputs have different lengths");
  if (pred.size() == 0) throw PreconditionError("score of empty vectors");
  double total = 0.0;
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    const double d = pred(k) - actual(k);
    total += d < 0.0 ? std::expm1(-d / 13.0) : std::expm1(d / 10.0);
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace gdcpd
