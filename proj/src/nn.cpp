// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lf2l/error.hpp"

namespace lf2l::nn {
namespace {

double activate(Activation activation, double z) {
  switch (activation) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
    case Activation::kIdentity:
      return z;
  }
  return z;
}

// Derivative expressed through the activation output a = f(z).
double activation_derivative(Activation activation, double a) {
  switch (activation) {
    case Activation::kRelu:
      return a > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid:
      return a * (1.0 - a);
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

void check_same_shape(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) {
    throw ShapeError("parameter sets have different layer counts");
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].in != b.layers[l].in || a.layers[l].out != b.layers[l].out) {
      throw ShapeError("parameter sets differ in shape at layer " + std::to_string(l));
    }
  }
}

void adam_update(double& theta, double g, double& m, double& v, double bias1, double bias2,
                 const TrainConfig& cfg) {
  m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
  v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g * g;
  const double m_hat = m / bias1;
  const double v_hat = v / bias2;
  theta -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kIdentity:
      return "identity";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::size_t ModelParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().in;
}

std::size_t ModelParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers) count += layer.weights.size() + layer.bias.size();
  return count;
}

std::size_t ModelParams::last_hidden_dim() const {
  if (layers.size() < 2) throw ShapeError("network has no hidden layer");
  return layers.back().in;
}

void ModelParams::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.in == 0 || layer.out == 0) {
      throw ShapeError("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      throw ShapeError("layer " + std::to_string(l) + " buffers do not match its shape");
    }
    if (l > 0 && layers[l - 1].out != layer.in) {
      throw ShapeError("layer " + std::to_string(l) + " input does not chain");
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      throw ConfigError("layer " + std::to_string(l) + " holds non-finite values");
    }
  }
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out = params;
  for (auto& layer : out.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return out;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ModelParams init_params(std::span<const std::size_t> layer_dims,
                        std::span<const Activation> activations, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw ConfigError("a network needs at least an input and an output dimension");
  }
  if (activations.size() != layer_dims.size() - 1) {
    throw ConfigError("expected one activation per layer");
  }
  if (std::find(layer_dims.begin(), layer_dims.end(), 0u) != layer_dims.end()) {
    throw ConfigError("layer dimensions must be positive");
  }
  RandomEngine rng(seed);
  ModelParams params;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    DenseLayer layer;
    layer.in = layer_dims[l];
    layer.out = layer_dims[l + 1];
    layer.activation = activations[l];
    layer.weights.resize(layer.in * layer.out);
    layer.bias.assign(layer.out, 0.0);
    const double bound = glorot_bound(layer.in, layer.out);
    for (double& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * bound;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

BatchActivations forward_batch(const ModelParams& params, const Matrix& x) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (x.cols() != params.input_dim()) {
    throw ShapeError("input width " + std::to_string(x.cols()) + " does not match network input " +
                     std::to_string(params.input_dim()));
  }
  BatchActivations result;
  result.acts.reserve(params.layers.size() + 1);
  result.acts.push_back(x);
  for (const auto& layer : params.layers) {
    const Matrix& a = result.acts.back();
    // Input-major accumulation over transposed weights: the inner loop is
    // contiguous and zero activations are skipped.
    std::vector<double> wt(layer.in * layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t k = 0; k < layer.in; ++k) wt[k * layer.out + o] = layer.weights[o * layer.in + k];
    }
    Matrix z(a.rows(), layer.out);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double* in = a.row(r).data();
      double* out = z.row(r).data();
      std::copy(layer.bias.begin(), layer.bias.end(), out);
      for (std::size_t k = 0; k < layer.in; ++k) {
        const double v = in[k];
        if (v == 0.0) continue;
        const double* w = wt.data() + k * layer.out;
        for (std::size_t o = 0; o < layer.out; ++o) out[o] += v * w[o];
      }
      for (std::size_t o = 0; o < layer.out; ++o) out[o] = activate(layer.activation, out[o]);
    }
    result.acts.push_back(std::move(z));
  }
  return result;
}

ForwardResult forward(const ModelParams& params, std::span<const double> x) {
  Matrix input(1, x.size(), std::vector<double>(x.begin(), x.end()));
  BatchActivations acts = forward_batch(params, input);
  ForwardResult result;
  result.output = acts.output().data();
  for (std::size_t k = 1; k + 1 < acts.acts.size(); ++k) {
    result.hidden.push_back(acts.acts[k].data());
  }
  return result;
}

std::vector<double> predict_proba(const ModelParams& params, const Matrix& x) {
  const BatchActivations acts = forward_batch(params, x);
  const Matrix& out = acts.output();
  std::vector<double> probs(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) probs[r] = out(r, 0);
  return probs;
}

ClassWeights class_balanced_weights(const ClassWeightConfig& cfg) {
  if (!(cfg.beta_cb >= 0.0) || !(cfg.beta_cb < 1.0)) {
    throw ConfigError("class-balancing beta must lie in [0, 1)");
  }
  if (cfg.negatives == 0 || cfg.positives == 0) {
    throw ConfigError("class-balanced weights need at least one sample of each class");
  }
  // (1 - beta^n) / (1 - beta), evaluated as -expm1(n log beta) / (1 - beta)
  // so that beta close to 1 keeps full precision.
  const auto effective_number = [&](std::uint64_t n) {
    const double log_beta = std::log1p(cfg.beta_cb - 1.0);
    return -std::expm1(static_cast<double>(n) * log_beta) / (1.0 - cfg.beta_cb);
  };
  const double raw_negative = 1.0 / effective_number(cfg.negatives);
  const double raw_positive = 1.0 / effective_number(cfg.positives);
  const double total = raw_negative + raw_positive;
  return {2.0 * raw_negative / total, 2.0 * raw_positive / total};
}

ClassWeights class_balanced_weights(std::span<const int> labels, double beta_cb) {
  ClassWeightConfig cfg;
  cfg.beta_cb = beta_cb;
  for (int y : labels) (y == 1 ? cfg.positives : cfg.negatives) += 1;
  return class_balanced_weights(cfg);
}

double weighted_bce_loss(std::span<const double> probs, std::span<const int> labels,
                         ClassWeights weights) {
  if (probs.size() != labels.size()) throw ShapeError("probabilities and labels differ in length");
  if (probs.empty()) throw ShapeError("loss over an empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClip, 1.0 - kProbabilityClip);
    const double term = labels[i] == 1 ? std::log(p) : std::log1p(-p);
    sum -= weights.for_label(labels[i]) * term;
  }
  return sum / static_cast<double>(probs.size());
}

Matrix bce_output_delta(const Matrix& probs, std::span<const int> labels, ClassWeights weights) {
  if (probs.rows() != labels.size()) throw ShapeError("probabilities and labels differ in length");
  // Gradient of the unclamped loss. The clamp only guards the logarithm; a
  // zero gradient in the clamped region would freeze confidently wrong rows.
  Matrix delta(probs.rows(), probs.cols());
  const double inv_n = 1.0 / static_cast<double>(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const double w = weights.for_label(labels[r]);
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      delta(r, c) = w * (probs(r, c) - static_cast<double>(labels[r])) * inv_n;
    }
  }
  return delta;
}

ModelParams backpropagate(const ModelParams& params, const BatchActivations& acts,
                          const Matrix& output_delta, const Matrix* last_hidden_grad) {
  const std::size_t depth = params.layers.size();
  if (acts.acts.size() != depth + 1) throw ShapeError("activations do not match the network");
  const std::size_t n = acts.acts.front().rows();
  if (output_delta.rows() != n || output_delta.cols() != params.output_dim()) {
    throw ShapeError("output delta shape mismatch");
  }
  if (last_hidden_grad != nullptr) {
    if (depth < 2) throw ShapeError("network has no hidden layer to receive a gradient");
    if (last_hidden_grad->rows() != n || last_hidden_grad->cols() != params.layers.back().in) {
      throw ShapeError("last-hidden gradient shape mismatch");
    }
  }

  ModelParams grad = zeros_like(params);
  Matrix delta = output_delta;
  for (std::size_t l = depth; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    DenseLayer& g = grad.layers[l];
    const Matrix& a_in = acts.acts[l];
    for (std::size_t r = 0; r < n; ++r) {
      const double* in = a_in.row(r).data();
      const double* d = delta.row(r).data();
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double dv = d[o];
        g.bias[o] += dv;
        if (dv == 0.0) continue;
        double* gw = g.weights.data() + o * layer.in;
        for (std::size_t k = 0; k < layer.in; ++k) gw[k] += dv * in[k];
      }
    }
    if (l == 0) break;

    Matrix upstream(n, layer.in);
    for (std::size_t r = 0; r < n; ++r) {
      const double* d = delta.row(r).data();
      double* up = upstream.row(r).data();
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        const double* w = layer.weights.data() + o * layer.in;
        for (std::size_t k = 0; k < layer.in; ++k) up[k] += dv * w[k];
      }
    }
    if (l == depth - 1 && last_hidden_grad != nullptr) {
      auto& up = upstream.data();
      const auto& extra = last_hidden_grad->data();
      for (std::size_t i = 0; i < up.size(); ++i) up[i] += extra[i];
    }
    const Activation prev_activation = params.layers[l - 1].activation;
    for (std::size_t i = 0; i < upstream.data().size(); ++i) {
      upstream.data()[i] *= activation_derivative(prev_activation, a_in.data()[i]);
    }
    delta = std::move(upstream);
  }
  return grad;
}

LossGradient backward(const ModelParams& params, const Matrix& batch_x,
                      std::span<const int> batch_y, ClassWeights weights) {
  if (batch_x.rows() == 0) throw ShapeError("empty batch");
  if (batch_x.rows() != batch_y.size()) throw ShapeError("batch features and labels differ in length");
  if (params.layers.empty() || params.layers.back().activation != Activation::kSigmoid ||
      params.output_dim() != 1) {
    throw ConfigError("loss gradient requires a single-unit sigmoid head");
  }
  const BatchActivations acts = forward_batch(params, batch_x);
  const Matrix& probs = acts.output();
  LossGradient result;
  result.loss = weighted_bce_loss(probs.data(), batch_y, weights);
  result.gradient = backpropagate(params, acts, bce_output_delta(probs, batch_y, weights));
  return result;
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
}

OptimizerState make_optimizer_state(const ModelParams& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const TrainConfig& cfg) {
  check_same_shape(params, grads);
  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      auto& p = params.layers[l];
      const auto& g = grads.layers[l];
      for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= cfg.learning_rate * g.weights[i];
      for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= cfg.learning_rate * g.bias[i];
    }
    ++state.step;
    return;
  }

  check_same_shape(params, state.first_moment);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    auto& m = state.first_moment.layers[l];
    auto& v = state.second_moment.layers[l];
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      adam_update(p.weights[i], g.weights[i], m.weights[i], v.weights[i], bias1, bias2, cfg);
    }
    for (std::size_t i = 0; i < p.bias.size(); ++i) {
      adam_update(p.bias[i], g.bias[i], m.bias[i], v.bias[i], bias1, bias2, cfg);
    }
  }
}

double optimizer_step(double value, double grad, ScalarOptimizerState& state,
                      const TrainConfig& cfg) {
  ++state.step;
  if (cfg.optimizer == OptimizerKind::kSgd) return value - cfg.learning_rate * grad;
  const double t = static_cast<double>(state.step);
  adam_update(value, grad, state.first_moment, state.second_moment,
              1.0 - std::pow(cfg.adam_beta1, t), 1.0 - std::pow(cfg.adam_beta2, t), cfg);
  return value;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    RandomEngine& rng) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Trainer::Trainer(ModelParams initial, TrainConfig cfg)
    : params_(std::move(initial)), cfg_(cfg), rng_(cfg.rng_seed) {
  cfg_.validate();
  params_.validate();
  opt_ = make_optimizer_state(params_);
}

void Trainer::set_params(ModelParams params) {
  check_same_shape(params_, params);
  params_ = std::move(params);
}

double Trainer::run_epoch(const Matrix& x, std::span<const int> y, ClassWeights weights) {
  if (x.rows() != y.size()) throw ShapeError("features and labels differ in length");
  if (x.rows() == 0) throw ShapeError("training on an empty dataset");
  double loss_sum = 0.0;
  std::vector<int> batch_y;
  for (const auto& batch : epoch_batches(x.rows(), cfg_.batch_size, rng_)) {
    const Matrix batch_x = x.select_rows(batch);
    batch_y.clear();
    for (std::size_t i : batch) batch_y.push_back(y[i]);
    LossGradient lg = backward(params_, batch_x, batch_y, weights);
    optimizer_step(params_, lg.gradient, opt_, cfg_);
    loss_sum += lg.loss * static_cast<double>(batch.size());
  }
  return loss_sum / static_cast<double>(x.rows());
}

TrainResult train(ModelParams initial, const Matrix& x, std::span<const int> y,
                  ClassWeights weights, const TrainConfig& cfg) {
  Trainer trainer(std::move(initial), cfg);
  TrainResult result;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    result.epoch_losses.push_back(trainer.run_epoch(x, y, weights));
  }
  result.params = trainer.params();
  return result;
}

}  // namespace lf2l::nn
