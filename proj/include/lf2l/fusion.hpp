// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Loss-fusion training across heterogeneous feature spaces.
//
// Each client's features are split into a global group (features every
// client has, trained with FedAvg) and a local group (common plus the
// client's unique features). After federated training the global model is
// frozen and its last hidden layer becomes an embedding. Locally, a main net
// over the local group is trained jointly with a one-layer prune net that
// reads the embedding (next to the main net's last hidden activation); the
// objective is
//
//   total   = l_main + beta * l_prune,      beta >= 0 learnable,
//   l_prune = bce(prune, y) + kl(prune || main),
//
// where the kl term pulls the main net towards the prune net's prediction.
// Predictions come from the main net alone.

#ifndef LF2L_FUSION_HPP_
#define LF2L_FUSION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lf2l/datasets.hpp"
#include "lf2l/matrix.hpp"
#include "lf2l/nn.hpp"

namespace lf2l::fusion {

// ---------------------------------------------------------------------------
// Feature grouping.

struct FeatureGrouping {
  std::vector<std::string> global_features;                // lexicographic
  std::vector<std::vector<std::string>> local_features;   // global, then unique
  std::vector<std::vector<std::string>> unique_features;  // lexicographic
};

// Features match on (name, kind) and, for categorical features, on the
// category list. Throws SchemaConflictError on a mismatch and GroupingError
// when fewer than two schemas are given or the intersection is empty.
FeatureGrouping group_features(std::span<const data::FeatureSchema> schemas);

// Union of all features (lexicographic). Conflicts as in group_features.
data::FeatureSchema union_schema(std::span<const data::FeatureSchema> schemas);

// Re-expresses `ds` over `target`, filling features it lacks with UNKNOWN.
data::Dataset align_to_schema(const data::Dataset& ds, const data::FeatureSchema& target);

// ---------------------------------------------------------------------------
// Architecture helpers.

// dims = {input, hidden..., 1}; relu hidden layers, sigmoid head.
nn::ModelParams make_classifier(std::size_t input_dim, std::span<const std::size_t> hidden,
                                std::uint64_t seed);

// Seed streams derived from a TrainConfig seed for the networks' initial
// weights. Shuffling uses the TrainConfig seed itself.
inline constexpr std::uint64_t kMainInitStream = 101;
inline constexpr std::uint64_t kCentralizedInitStream = 103;

// Last-hidden-layer activations of `global_model`, one row per input row.
Matrix extract_embeddings(const nn::ModelParams& global_model, const Matrix& x_global);

struct FusionLoss {
  double total = 0.0;
  double main = 0.0;
  double prune = 0.0;      // fit + agreement
  double fit = 0.0;        // class-weighted bce of the prune net
  double agreement = 0.0;  // class-weighted kl(prune || main)
};

// Class-weighted Bernoulli KL divergence kl(teacher || student), averaged
// over rows, probabilities clamped as in weighted_bce_loss.
double weighted_kl_divergence(std::span<const double> teacher, std::span<const double> student,
                              std::span<const int> labels, nn::ClassWeights weights);

// total = l_main + beta * l_prune.
FusionLoss fusion_loss(std::span<const double> main_probs, std::span<const double> prune_probs,
                       std::span<const int> labels, nn::ClassWeights weights, double beta);

struct FusionConfig {
  nn::TrainConfig train;  // main and prune nets; rng_seed drives shuffling
  // Optimizer for beta; only learning_rate, optimizer and the adam constants
  // are read.
  nn::TrainConfig beta_train{.learning_rate = 1e-3, .optimizer = nn::OptimizerKind::kSgd};
  double beta_init = 1.0;
  double beta_max = 10.0;
  bool freeze_beta = false;
  // Precompute embeddings once instead of per batch (values are identical).
  bool cache_embeddings = true;

  void validate() const;
};

struct FusionState {
  nn::ModelParams global_model;  // frozen
  nn::ModelParams main_net;      // local features -> probability
  nn::ModelParams prune_net;     // exactly one sigmoid layer
  double beta = 1.0;
  nn::OptimizerState main_opt;
  nn::OptimizerState prune_opt;
  nn::ScalarOptimizerState beta_opt;

  // Throws ConfigError / ShapeError when the invariants do not hold.
  void validate() const;
};

// The prune net reads the global embedding followed by the main net's last
// hidden activation.
std::size_t prune_input_dim(const FusionState& state);

// The main net is initialized exactly as baseline_localized initializes it.
// The prune net starts as the global model's output layer on the embedding
// columns with zero weights on the main-net columns, so before training it
// reproduces the federated model's prediction.
FusionState make_fusion_state(nn::ModelParams global_model, std::size_t local_input_dim,
                              std::span<const std::size_t> main_hidden, const FusionConfig& cfg);

struct FusionEpoch {
  double l_main = 0.0;   // sample-weighted mean over the epoch's batches
  double l_prune = 0.0;
  double beta = 0.0;     // value after the epoch's last step
};

struct FusionResult {
  FusionState state;
  std::vector<FusionEpoch> trace;
  std::vector<double> beta_steps;  // beta after every optimizer step
};

// Per batch: the prune net is updated by beta * d fit, reading the main
// net's hidden activation as a constant input; the main net by
// d l_main + beta * d agreement with the prune prediction held fixed; beta
// by d total / d beta = l_prune, then clamped to [0, beta_max].
FusionResult fusion_train(FusionState state, const Matrix& x_local, const Matrix& x_global,
                          std::span<const int> labels, nn::ClassWeights weights,
                          const FusionConfig& cfg);

// Main net only; the prune net, beta and global model take no part.
std::vector<double> predict_lf2l(const FusionState& state, const Matrix& x_local);

// ---------------------------------------------------------------------------
// Baselines.

// Plain training of the main-net architecture on the local feature group,
// initialized exactly as make_fusion_state initializes the main net.
nn::TrainResult baseline_localized(const Matrix& x_local, std::span<const int> labels,
                                   nn::ClassWeights weights,
                                   std::span<const std::size_t> hidden,
                                   const nn::TrainConfig& cfg);

// Federated global model on the common features alone.
std::vector<double> baseline_hfl_predict(const nn::ModelParams& global_model,
                                         const Matrix& x_global);

struct CentralizedResult {
  data::FeatureSchema schema;  // union schema the model was trained on
  nn::ModelParams model;
  std::size_t pooled_rows = 0;
  std::size_t unknown_cells = 0;  // cells filled with UNKNOWN by pooling
  std::vector<std::vector<double>> test_probs;  // per client
};

// Pools every client's training rows under the union schema (absent
// features become UNKNOWN), trains one network and scores each client's
// test rows.
CentralizedResult baseline_centralized(std::span<const data::Dataset> train,
                                       std::span<const data::Dataset> test,
                                       std::span<const std::size_t> hidden,
                                       const nn::TrainConfig& cfg, double beta_cb);

}  // namespace lf2l::fusion

#endif  // LF2L_FUSION_HPP_
