// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lf2l/error.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::fusion {
namespace {

void check_compatible(const data::Feature& a, const data::Feature& b) {
  if (a.kind != b.kind) {
    throw SchemaConflictError("feature '" + a.name + "' is " + std::string(data::to_string(a.kind)) +
                              " in one schema and " + std::string(data::to_string(b.kind)) +
                              " in another");
  }
  if (a.categories != b.categories) {
    throw SchemaConflictError("feature '" + a.name + "' has different category lists");
  }
}

// Every feature by name, checked for conflicts across schemas.
std::map<std::string, data::Feature> collect_features(std::span<const data::FeatureSchema> schemas) {
  std::map<std::string, data::Feature> all;
  for (const auto& schema : schemas) {
    for (const auto& f : schema.features()) {
      const auto [it, inserted] = all.emplace(f.name, f);
      if (!inserted) check_compatible(it->second, f);
    }
  }
  return all;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

}  // namespace

FeatureGrouping group_features(std::span<const data::FeatureSchema> schemas) {
  if (schemas.size() < 2) throw GroupingError("feature grouping needs at least two client schemas");
  collect_features(schemas);

  std::set<std::string> common;
  for (const auto& name : schemas.front().names()) common.insert(name);
  for (const auto& schema : schemas.subspan(1)) {
    std::set<std::string> next;
    for (const auto& name : schema.names()) {
      if (common.count(name)) next.insert(name);
    }
    common = std::move(next);
  }
  if (common.empty()) {
    throw GroupingError("client schemas share no features; HFL impossible");
  }

  FeatureGrouping g;
  g.global_features.assign(common.begin(), common.end());
  for (const auto& schema : schemas) {
    std::vector<std::string> names = schema.names();
    std::vector<std::string> unique;
    for (const auto& name : names) {
      if (!common.count(name)) unique.push_back(name);
    }
    std::sort(unique.begin(), unique.end());
    std::vector<std::string> local = g.global_features;
    local.insert(local.end(), unique.begin(), unique.end());
    g.local_features.push_back(std::move(local));
    g.unique_features.push_back(std::move(unique));
  }
  return g;
}

data::FeatureSchema union_schema(std::span<const data::FeatureSchema> schemas) {
  std::vector<data::Feature> features;
  for (auto& [name, f] : collect_features(schemas)) features.push_back(f);
  return data::FeatureSchema(std::move(features));
}

data::Dataset align_to_schema(const data::Dataset& ds, const data::FeatureSchema& target) {
  std::vector<std::optional<std::size_t>> source;
  for (const auto& f : target.features()) {
    const auto idx = ds.schema.find(f.name);
    if (idx) check_compatible(f, ds.schema.features()[*idx]);
    source.push_back(idx);
  }
  data::Dataset out;
  out.schema = target;
  out.labels = ds.labels;
  out.rows.reserve(ds.size());
  for (const auto& row : ds.rows) {
    std::vector<data::Cell> aligned;
    aligned.reserve(source.size());
    for (const auto& idx : source) aligned.push_back(idx ? row[*idx] : data::Cell{data::kUnknown});
    out.rows.push_back(std::move(aligned));
  }
  return out;
}

nn::ModelParams make_classifier(std::size_t input_dim, std::span<const std::size_t> hidden,
                                std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  std::vector<nn::Activation> acts(hidden.size(), nn::Activation::kRelu);
  acts.push_back(nn::Activation::kSigmoid);
  return nn::init_params(dims, acts, seed);
}

Matrix extract_embeddings(const nn::ModelParams& global_model, const Matrix& x_global) {
  if (global_model.layers.size() < 2) {
    throw ShapeError("global model has no hidden layer to embed from");
  }
  nn::BatchActivations acts = nn::forward_batch(global_model, x_global);
  return std::move(acts.acts[acts.acts.size() - 2]);
}

double weighted_kl_divergence(std::span<const double> teacher, std::span<const double> student,
                              std::span<const int> labels, nn::ClassWeights weights) {
  if (teacher.size() != labels.size() || student.size() != labels.size()) {
    throw ShapeError("divergence inputs differ in length");
  }
  if (labels.empty()) throw ShapeError("divergence of an empty batch");
  const auto clip = [](double p) {
    return std::clamp(p, nn::kProbabilityClip, 1.0 - nn::kProbabilityClip);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = clip(teacher[i]);
    const double q = clip(student[i]);
    const double kl = p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    sum += weights.for_label(labels[i]) * std::max(kl, 0.0);
  }
  return sum / static_cast<double>(labels.size());
}

FusionLoss fusion_loss(std::span<const double> main_probs, std::span<const double> prune_probs,
                       std::span<const int> labels, nn::ClassWeights weights, double beta) {
  if (!(beta >= 0.0)) throw ConfigError("fusion weight beta must be nonnegative");
  if (main_probs.size() != labels.size() || prune_probs.size() != labels.size()) {
    throw ShapeError("fusion loss inputs differ in length");
  }
  FusionLoss loss;
  loss.main = nn::weighted_bce_loss(main_probs, labels, weights);
  loss.fit = nn::weighted_bce_loss(prune_probs, labels, weights);
  loss.agreement = weighted_kl_divergence(prune_probs, main_probs, labels, weights);
  loss.prune = loss.fit + loss.agreement;
  loss.total = loss.main + beta * loss.prune;
  return loss;
}

void FusionConfig::validate() const {
  train.validate();
  if (!(beta_train.learning_rate > 0.0)) throw ConfigError("beta learning rate must be positive");
  if (!(beta_max > 0.0)) throw ConfigError("beta_max must be positive");
  if (!(beta_init >= 0.0 && beta_init <= beta_max)) {
    throw ConfigError("beta_init must lie in [0, beta_max]");
  }
}

void FusionState::validate() const {
  global_model.validate();
  main_net.validate();
  prune_net.validate();
  if (global_model.layers.size() < 2) throw ShapeError("global model has no hidden layer");
  if (main_net.layers.size() < 2) throw ShapeError("main net has no hidden layer");
  if (prune_net.layers.size() != 1) throw ShapeError("prune net must have exactly one layer");
  if (prune_net.layers[0].out != 1 || prune_net.layers[0].activation != nn::Activation::kSigmoid) {
    throw ShapeError("prune net must map to a single sigmoid unit");
  }
  if (prune_net.input_dim() != prune_input_dim(*this)) {
    throw ShapeError("prune net input does not match embedding + main hidden width");
  }
  if (main_net.output_dim() != 1 || main_net.layers.back().activation != nn::Activation::kSigmoid) {
    throw ShapeError("main net must end in a single sigmoid unit");
  }
  if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
}

std::size_t prune_input_dim(const FusionState& state) {
  return state.global_model.last_hidden_dim() + state.main_net.last_hidden_dim();
}

FusionState make_fusion_state(nn::ModelParams global_model, std::size_t local_input_dim,
                              std::span<const std::size_t> main_hidden, const FusionConfig& cfg) {
  cfg.validate();
  if (main_hidden.empty()) throw ConfigError("main net needs at least one hidden layer");
  FusionState state;
  state.global_model = std::move(global_model);
  state.main_net = make_classifier(local_input_dim, main_hidden,
                                   derive_seed(cfg.train.rng_seed, kMainInitStream));
  const nn::DenseLayer& head = state.global_model.layers.back();
  if (head.out != 1) throw ShapeError("global model must end in a single unit");
  nn::DenseLayer prune;
  prune.in = head.in + main_hidden.back();
  prune.out = 1;
  prune.activation = nn::Activation::kSigmoid;
  prune.weights.assign(prune.in, 0.0);
  std::copy(head.weights.begin(), head.weights.end(), prune.weights.begin());
  prune.bias = head.bias;
  state.prune_net.layers.push_back(std::move(prune));
  state.beta = cfg.beta_init;
  state.main_opt = nn::make_optimizer_state(state.main_net);
  state.prune_opt = nn::make_optimizer_state(state.prune_net);
  state.validate();
  return state;
}

FusionResult fusion_train(FusionState state, const Matrix& x_local, const Matrix& x_global,
                          std::span<const int> labels, nn::ClassWeights weights,
                          const FusionConfig& cfg) {
  cfg.validate();
  state.validate();
  const std::size_t n = labels.size();
  if (x_local.rows() != n || x_global.rows() != n) {
    throw ShapeError("local rows, global rows and labels are not aligned");
  }
  if (n == 0) throw ShapeError("fusion training on an empty dataset");
  if (x_local.cols() != state.main_net.input_dim()) throw ShapeError("local feature width mismatch");
  if (x_global.cols() != state.global_model.input_dim()) {
    throw ShapeError("global feature width mismatch");
  }

  Matrix cached;
  if (cfg.cache_embeddings) cached = extract_embeddings(state.global_model, x_global);

  RandomEngine rng(cfg.train.rng_seed);
  FusionResult result;
  std::vector<int> batch_y;
  for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    double main_sum = 0.0;
    double prune_sum = 0.0;
    for (const auto& batch : nn::epoch_batches(n, cfg.train.batch_size, rng)) {
      batch_y = gather_labels(labels, batch);
      const Matrix local_batch = x_local.select_rows(batch);
      const Matrix embedding = cfg.cache_embeddings
                                   ? cached.select_rows(batch)
                                   : extract_embeddings(state.global_model, x_global.select_rows(batch));

      const nn::BatchActivations main_acts = nn::forward_batch(state.main_net, local_batch);
      const nn::BatchActivations prune_acts = nn::forward_batch(
          state.prune_net, Matrix::hconcat(embedding, main_acts.last_hidden()));
      const Matrix& main_probs = main_acts.output();
      const Matrix& prune_probs = prune_acts.output();

      const FusionLoss loss = fusion_loss(main_probs.data(), prune_probs.data(), batch_y, weights,
                                          state.beta);
      Matrix main_delta = nn::bce_output_delta(main_probs, batch_y, weights);

      if (state.beta != 0.0) {
        Matrix prune_delta = nn::bce_output_delta(prune_probs, batch_y, weights);
        const double scale = state.beta / static_cast<double>(batch.size());
        for (std::size_t r = 0; r < batch.size(); ++r) {
          prune_delta(r, 0) *= state.beta;
          // d kl(p || q) / d logit(q) = q - p.
          main_delta(r, 0) += scale * weights.for_label(batch_y[r]) *
                              (main_probs(r, 0) - prune_probs(r, 0));
        }
        const nn::ModelParams prune_grad =
            nn::backpropagate(state.prune_net, prune_acts, prune_delta);
        nn::optimizer_step(state.prune_net, prune_grad, state.prune_opt, cfg.train);
      }
      const nn::ModelParams main_grad = nn::backpropagate(state.main_net, main_acts, main_delta);
      nn::optimizer_step(state.main_net, main_grad, state.main_opt, cfg.train);

      if (!cfg.freeze_beta) {
        // d total / d beta = l_prune.
        const double next = nn::optimizer_step(state.beta, loss.prune, state.beta_opt, cfg.beta_train);
        state.beta = std::clamp(next, 0.0, cfg.beta_max);
      }
      result.beta_steps.push_back(state.beta);
      main_sum += loss.main * static_cast<double>(batch.size());
      prune_sum += loss.prune * static_cast<double>(batch.size());
    }
    result.trace.push_back(
        {main_sum / static_cast<double>(n), prune_sum / static_cast<double>(n), state.beta});
  }
  result.state = std::move(state);
  return result;
}

std::vector<double> predict_lf2l(const FusionState& state, const Matrix& x_local) {
  return nn::predict_proba(state.main_net, x_local);
}

nn::TrainResult baseline_localized(const Matrix& x_local, std::span<const int> labels,
                                   nn::ClassWeights weights,
                                   std::span<const std::size_t> hidden,
                                   const nn::TrainConfig& cfg) {
  if (hidden.empty()) throw ConfigError("main net needs at least one hidden layer");
  nn::ModelParams init =
      make_classifier(x_local.cols(), hidden, derive_seed(cfg.rng_seed, kMainInitStream));
  return nn::train(std::move(init), x_local, labels, weights, cfg);
}

std::vector<double> baseline_hfl_predict(const nn::ModelParams& global_model,
                                         const Matrix& x_global) {
  return nn::predict_proba(global_model, x_global);
}

CentralizedResult baseline_centralized(std::span<const data::Dataset> train,
                                       std::span<const data::Dataset> test,
                                       std::span<const std::size_t> hidden,
                                       const nn::TrainConfig& cfg, double beta_cb) {
  if (train.size() < 2) throw ConfigError("centralized pooling needs at least two datasets");
  if (test.size() != train.size()) throw ConfigError("one test split per training split expected");

  std::vector<data::FeatureSchema> schemas;
  for (const auto& ds : train) schemas.push_back(ds.schema);
  for (const auto& ds : test) schemas.push_back(ds.schema);

  CentralizedResult result;
  result.schema = union_schema(schemas);

  data::Dataset pooled;
  pooled.schema = result.schema;
  for (const auto& ds : train) {
    data::Dataset aligned = align_to_schema(ds, result.schema);
    result.unknown_cells += ds.size() * (result.schema.size() - ds.schema.size());
    pooled.rows.insert(pooled.rows.end(), std::make_move_iterator(aligned.rows.begin()),
                       std::make_move_iterator(aligned.rows.end()));
    pooled.labels.insert(pooled.labels.end(), aligned.labels.begin(), aligned.labels.end());
  }
  result.pooled_rows = pooled.size();

  const data::Encoder encoder = data::Encoder::fit(pooled);
  const data::EncodedMatrix encoded = encoder.encode(pooled);
  const nn::ClassWeights weights = nn::class_balanced_weights(encoded.labels, beta_cb);
  nn::ModelParams init = make_classifier(encoded.cols(), hidden,
                                         derive_seed(cfg.rng_seed, kCentralizedInitStream));
  result.model = nn::train(std::move(init), encoded.x, encoded.labels, weights, cfg).params;

  for (const auto& ds : test) {
    const data::EncodedMatrix t = encoder.encode(align_to_schema(ds, result.schema));
    result.test_probs.push_back(nn::predict_proba(result.model, t.x));
  }
  return result;
}

}  // namespace lf2l::fusion
