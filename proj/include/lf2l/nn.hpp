// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense-network engine: forward pass, analytic backpropagation for a
// class-weighted binary cross-entropy head, and SGD/Adam updates. Everything
// runs in double precision and is bitwise deterministic for a given seed.

#ifndef LF2L_NN_HPP_
#define LF2L_NN_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lf2l/matrix.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::nn {

// Numeric values are the wire tags used by the parameter codec.
enum class Activation : std::uint8_t { kRelu = 0, kSigmoid = 1, kIdentity = 2 };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
  Activation activation = Activation::kIdentity;

  double& weight(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double weight(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

  bool operator==(const DenseLayer&) const = default;
};

struct ModelParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  // Width of the activation feeding the final layer (the last hidden layer).
  std::size_t last_hidden_dim() const;

  // Throws ShapeError when layer dimensions do not chain or buffers are
  // mis-sized, and ConfigError on non-finite values.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

// Same architecture, every weight and bias set to 0.
ModelParams zeros_like(const ModelParams& params);

// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +sqrt(...)], zero
// biases. `layer_dims` has one more entry than `activations`.
ModelParams init_params(std::span<const std::size_t> layer_dims,
                        std::span<const Activation> activations,
                        std::uint64_t seed);

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

struct ForwardResult {
  std::vector<double> output;
  // Activation of every layer except the last; back() is the last hidden layer.
  std::vector<std::vector<double>> hidden;
};

ForwardResult forward(const ModelParams& params, std::span<const double> x);

// Per-layer activations for a batch: acts[0] is the input, acts[k] the output
// of layer k-1. acts.back() is the network output.
struct BatchActivations {
  std::vector<Matrix> acts;

  const Matrix& output() const { return acts.back(); }
  const Matrix& last_hidden() const { return acts[acts.size() - 2]; }
};

BatchActivations forward_batch(const ModelParams& params, const Matrix& x);

// Column 0 of the network output for every row (classifier probabilities).
std::vector<double> predict_proba(const ModelParams& params, const Matrix& x);

// ---------------------------------------------------------------------------
// Class-balanced weighting.

struct ClassWeightConfig {
  double beta_cb = 0.0;
  std::uint64_t negatives = 0;  // n0
  std::uint64_t positives = 0;  // n1
};

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;

  double for_label(int label) const { return label == 1 ? positive : negative; }
  bool operator==(const ClassWeights&) const = default;
};

// Effective-number weighting: E_c = (1 - beta^n_c) / (1 - beta), raw weight
// 1 / E_c, normalized so the two weights sum to 2.
ClassWeights class_balanced_weights(const ClassWeightConfig& cfg);
ClassWeights class_balanced_weights(std::span<const int> labels, double beta_cb);

// ---------------------------------------------------------------------------
// Loss and gradients.

inline constexpr double kProbabilityClip = 1e-7;

// Mean over samples of -w_y [y log p + (1-y) log(1-p)], p clamped to
// [clip, 1 - clip].
double weighted_bce_loss(std::span<const double> probs, std::span<const int> labels,
                         ClassWeights weights);

// dLoss/dz for a sigmoid head, z the pre-activation: w_y (p - y) / n.
Matrix bce_output_delta(const Matrix& probs, std::span<const int> labels,
                        ClassWeights weights);

// Backpropagates `output_delta` (dLoss/d pre-activation of the final layer,
// one row per sample) through the network. `last_hidden_grad`, when given,
// is an additional dLoss/d(last hidden activation) term from another head
// that consumes that layer.
ModelParams backpropagate(const ModelParams& params, const BatchActivations& acts,
                          const Matrix& output_delta,
                          const Matrix* last_hidden_grad = nullptr);

struct LossGradient {
  double loss = 0.0;
  ModelParams gradient;
};

// Weighted BCE loss of a sigmoid-headed network and its exact gradient.
LossGradient backward(const ModelParams& params, const Matrix& batch_x,
                      std::span<const int> batch_y, ClassWeights weights);

// ---------------------------------------------------------------------------
// Optimization.

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

struct OptimizerState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const ModelParams& params);

// sgd: theta -= lr * g. adam: bias-corrected first/second moments.
void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const TrainConfig& cfg);

// Single scalar parameter with its own moments (used for the fusion weight).
struct ScalarOptimizerState {
  double first_moment = 0.0;
  double second_moment = 0.0;
  std::uint64_t step = 0;
};

double optimizer_step(double value, double grad, ScalarOptimizerState& state,
                      const TrainConfig& cfg);

// Seeded shuffle of [0, n) cut into consecutive batches; the last batch may
// be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    RandomEngine& rng);

// Mini-batch trainer. Optimizer state and the shuffle stream persist across
// epochs and across set_params(), so training in several chunks is bitwise
// identical to one uninterrupted run.
class Trainer {
 public:
  Trainer(ModelParams initial, TrainConfig cfg);

  // One pass over the data; returns the sample-weighted mean batch loss.
  double run_epoch(const Matrix& x, std::span<const int> y, ClassWeights weights);

  const ModelParams& params() const { return params_; }
  void set_params(ModelParams params);
  const TrainConfig& config() const { return cfg_; }

 private:
  ModelParams params_;
  TrainConfig cfg_;
  OptimizerState opt_;
  RandomEngine rng_;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;
};

TrainResult train(ModelParams initial, const Matrix& x, std::span<const int> y,
                  ClassWeights weights, const TrainConfig& cfg);

}  // namespace lf2l::nn

#endif  // LF2L_NN_HPP_
