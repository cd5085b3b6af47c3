#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfairdp/dataset.hpp"
#include "pfairdp/privacy.hpp"
#include "pfairdp/rng.hpp"

namespace pfairdp {

// Feed-forward binary classifier: ReLU hidden layers, sigmoid output, trained
// with binary cross-entropy. Scores are clamped a hair inside (0, 1) so the
// loss stays finite and downstream consumers can rely on strict bounds.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input width, hidden..., output (must be 1)
  std::uint64_t init_seed = 0;

  void validate() const {
    if (layer_sizes.size() < 3)
      throw std::invalid_argument("MlpSpec: need at least input, one hidden, and output layer");
    for (const auto s : layer_sizes)
      if (s == 0) throw std::invalid_argument("MlpSpec: zero-width layer");
    if (layer_sizes.back() != 1)
      throw std::invalid_argument("MlpSpec: final layer width must be 1");
  }
};

class Mlp {
 public:
  static constexpr double kScoreClamp = 1e-12;

  explicit Mlp(const MlpSpec& spec) : sizes_(spec.layer_sizes) {
    spec.validate();
    const std::size_t layers = sizes_.size() - 1;
    w_off_.resize(layers);
    b_off_.resize(layers);
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      w_off_[l] = off;
      off += sizes_[l + 1] * sizes_[l];
      b_off_[l] = off;
      off += sizes_[l + 1];
    }
    params_.assign(off, 0.0);
    // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
    Rng rng(spec.init_seed);
    for (std::size_t l = 0; l < layers; ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      for (std::size_t k = 0; k < sizes_[l + 1] * sizes_[l]; ++k)
        params_[w_off_[l] + k] = rng.uniform(-bound, bound);
    }
  }

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Scratch buffers for one forward/backward pass; reused across samples.
  struct Workspace {
    std::vector<std::vector<double>> a;      // a[0] = input, a[l+1] = layer l activation
    std::vector<std::vector<double>> z;      // pre-activations
    std::vector<std::vector<double>> delta;  // dLoss/dz per layer
  };

  Workspace make_workspace() const {
    Workspace ws;
    const std::size_t layers = layer_count();
    ws.a.resize(layers + 1);
    ws.z.resize(layers);
    ws.delta.resize(layers);
    ws.a[0].resize(sizes_[0]);
    for (std::size_t l = 0; l < layers; ++l) {
      ws.a[l + 1].resize(sizes_[l + 1]);
      ws.z[l].resize(sizes_[l + 1]);
      ws.delta[l].resize(sizes_[l + 1]);
    }
    return ws;
  }

  double forward(std::span<const double> x, Workspace& ws) const {
    if (x.size() != sizes_.front()) throw std::invalid_argument("Mlp: input width mismatch");
    std::copy(x.begin(), x.end(), ws.a[0].begin());
    const std::size_t layers = layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* W = params_.data() + w_off_[l];
      const double* b = params_.data() + b_off_[l];
      const double* prev = ws.a[l].data();
      for (std::size_t i = 0; i < out; ++i) {
        double s = b[i];
        const double* row = W + i * in;
        for (std::size_t j = 0; j < in; ++j) s += row[j] * prev[j];
        ws.z[l][i] = s;
        ws.a[l + 1][i] = (l + 1 < layers) ? (s > 0.0 ? s : 0.0) : sigmoid(s);
      }
    }
    return ws.a[layers][0];
  }

  double forward(std::span<const double> x) const {
    Workspace ws = make_workspace();
    return forward(x, ws);
  }

  std::vector<double> scores(const Matrix& X) const {
    Workspace ws = make_workspace();
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = forward(X.row(i), ws);
    return out;
  }

  // Gradient of the BCE loss for one sample, appended into `grad` (which must
  // be zeroed by the caller and sized parameter_count()). Returns the loss.
  // Uses dLoss/dz_out = score - y; ReLU passes gradient only where z > 0.
  double backward(std::span<const double> x, int y, Workspace& ws,
                  std::span<double> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("Mlp: gradient size mismatch");
    const double s = forward(x, ws);
    const std::size_t layers = layer_count();
    ws.delta[layers - 1][0] = s - static_cast<double>(y);
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* prev = ws.a[l].data();
      const double* dz = ws.delta[l].data();
      double* gW = grad.data() + w_off_[l];
      double* gb = grad.data() + b_off_[l];
      for (std::size_t i = 0; i < out; ++i) {
        const double d = dz[i];
        double* row = gW + i * in;
        for (std::size_t j = 0; j < in; ++j) row[j] += d * prev[j];
        gb[i] += d;
      }
      if (l > 0) {
        const double* W = params_.data() + w_off_[l];
        double* dprev = ws.delta[l - 1].data();
        for (std::size_t j = 0; j < in; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < out; ++i) acc += W[i * in + j] * dz[i];
          dprev[j] = ws.z[l - 1][j] > 0.0 ? acc : 0.0;
        }
      }
    }
    const double yc = static_cast<double>(y);
    return -(yc * std::log(s) + (1.0 - yc) * std::log(1.0 - s));
  }

  static double sigmoid(double z) {
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::min(1.0 - kScoreClamp, std::max(kScoreClamp, s));
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> params_;
};

// One flat gradient per row; zero-allocation batch paths reuse Mlp::backward
// directly, this is the plain-vector form.
inline std::vector<std::vector<double>> per_sample_gradients(const Mlp& model, const Matrix& X,
                                                             const std::vector<int>& labels) {
  if (X.rows() != labels.size())
    throw std::invalid_argument("per_sample_gradients: row/label mismatch");
  Mlp::Workspace ws = model.make_workspace();
  std::vector<std::vector<double>> grads(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    grads[i].assign(model.parameter_count(), 0.0);
    model.backward(X.row(i), labels[i], ws, grads[i]);
  }
  return grads;
}

struct OptimizerState {
  enum class Kind { sgd, adam };
  Kind kind = Kind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> m, v;  // first/second Adam moments
  std::int64_t t = 0;

  static OptimizerState sgd() { return {Kind::sgd}; }
  static OptimizerState adam() { return {Kind::adam}; }
};

// In-place parameter update. Adam uses bias-corrected moment estimates.
inline void optimizer_step(std::vector<double>& weights, const std::vector<double>& grad,
                           double learning_rate, OptimizerState& state) {
  if (weights.size() != grad.size())
    throw std::invalid_argument("optimizer_step: weight/gradient size mismatch");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer_step: learning rate must be > 0");
  if (state.kind == OptimizerState::Kind::sgd) {
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= learning_rate * grad[i];
    return;
  }
  if (state.m.size() != weights.size()) {
    state.m.assign(weights.size(), 0.0);
    state.v.assign(weights.size(), 0.0);
    state.t = 0;
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    weights[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

struct TrainSpec {
  std::size_t epochs = 20;
  std::size_t batch_size = 20;
  double learning_rate = 1e-3;
  OptimizerState::Kind optimizer = OptimizerState::Kind::adam;
  std::optional<DpParams> dp;  // engaged = clip + noise + accountant
  std::uint64_t seed = 0;

  void validate(std::size_t n) const {
    if (epochs == 0) throw std::invalid_argument("TrainSpec: epochs must be >= 1");
    if (batch_size == 0 || batch_size > n)
      throw std::invalid_argument("TrainSpec: batch_size must be in [1, n]");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainSpec: learning rate must be > 0");
    if (dp) {
      dp->validate();
      if (!(dp->noise_multiplier > 0.0))
        throw std::invalid_argument("TrainSpec: DP training needs noise_multiplier > 0");
    }
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  Mlp model;
  std::vector<EpochLog> log;
  std::optional<PrivacySpend> privacy;  // absent for plain training
  bool finite = true;                   // false if weights or losses diverged
};

// Mini-batch training. Every path computes per-sample gradients; the plain
// path averages them, the DP path clips each one, adds calibrated Gaussian
// noise to the sum, and divides by the batch size. Shuffling is per-epoch, the
// trailing partial batch is kept, and the spend is accounted with the nominal
// sampling rate batch/n over epochs * ceil(n / batch) steps.
inline TrainResult train_mlp(const Dataset& data, const MlpSpec& arch, const TrainSpec& spec) {
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("train_mlp: empty training set");
  spec.validate(data.size());
  if (arch.layer_sizes.empty() || arch.layer_sizes.front() != data.dim())
    throw std::invalid_argument("train_mlp: input layer width must match feature count");

  const std::size_t n = data.size();
  TrainResult result{Mlp(arch), {}, std::nullopt, true};
  Mlp& model = result.model;
  Mlp::Workspace ws = model.make_workspace();
  Rng rng(spec.seed);
  OptimizerState opt;
  opt.kind = spec.optimizer;

  std::vector<std::vector<double>> grads;  // per-sample buffers, reused
  std::vector<double> mean_grad(model.parameter_count());

  const std::size_t steps_per_epoch = (n + spec.batch_size - 1) / spec.batch_size;
  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    const auto perm = rng.permutation(n);
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::size_t begin = step * spec.batch_size;
      const std::size_t end = std::min(begin + spec.batch_size, n);
      const std::size_t chunk = end - begin;
      grads.resize(chunk);
      for (std::size_t k = 0; k < chunk; ++k) {
        grads[k].assign(model.parameter_count(), 0.0);
        const std::size_t idx = perm[begin + k];
        loss_sum += model.backward(data.features.row(idx), data.labels[idx], ws, grads[k]);
      }
      if (spec.dp) {
        grads = clip_per_sample(std::move(grads), spec.dp->clipping_norm);
        mean_grad = noisy_aggregate(grads, spec.dp->clipping_norm, spec.dp->noise_multiplier,
                                    chunk, rng);
      } else {
        std::fill(mean_grad.begin(), mean_grad.end(), 0.0);
        for (const auto& g : grads)
          for (std::size_t j = 0; j < mean_grad.size(); ++j) mean_grad[j] += g[j];
        const double inv = 1.0 / static_cast<double>(chunk);
        for (double& v : mean_grad) v *= inv;
      }
      optimizer_step(model.params(), mean_grad, spec.learning_rate, opt);
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    result.log.push_back({epoch + 1, mean_loss});
    if (!std::isfinite(mean_loss)) result.finite = false;
  }

  for (const double p : model.params())
    if (!std::isfinite(p)) result.finite = false;

  if (spec.dp) {
    const double q = static_cast<double>(spec.batch_size) / static_cast<double>(n);
    const auto steps = static_cast<std::int64_t>(spec.epochs * steps_per_epoch);
    result.privacy = account_dp_sgd(spec.dp->noise_multiplier, q, steps, spec.dp->delta);
  }
  return result;
}

inline double evaluate_accuracy(const Mlp& model, const Dataset& data, double threshold = 0.5) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  Mlp::Workspace ws = model.make_workspace();
  double correct = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int pred = model.forward(data.features.row(i), ws) >= threshold ? 1 : 0;
    correct += pred == data.labels[i];
  }
  return correct / static_cast<double>(data.size());
}

inline std::vector<int> threshold_predictions(const std::vector<double>& scores, double threshold) {
  std::vector<int> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold ? 1 : 0;
  return preds;
}

}  // namespace pfairdp
