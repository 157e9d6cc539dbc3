// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lf2l/error.hpp"
#include "lf2l/fed.hpp"
#include "lf2l/fusion.hpp"
#include "oracles.hpp"

using namespace lf2l;
using namespace lf2l::fusion;
using data::Feature;
using data::FeatureKind;
using data::FeatureSchema;

namespace {

const std::vector<std::size_t> kHidden{8, 4};

struct Toy {
  Matrix x_local;
  Matrix x_global;
  std::vector<int> y;
  nn::ClassWeights w{0.6, 1.4};
  nn::ModelParams global;
};

Toy make_toy(std::uint64_t seed, std::size_t n = 60) {
  RandomEngine rng(seed);
  Toy t;
  t.x_global = oracle::random_matrix(rng, n, 3);
  const Matrix extra = oracle::random_matrix(rng, n, 2);
  t.x_local = Matrix::hconcat(t.x_global, extra);
  t.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.y[i] = t.x_local(i, 0) + t.x_local(i, 4) > 0.5 ? 1 : 0;
  t.global = make_classifier(3, std::vector<std::size_t>{6, 4}, seed + 100);
  return t;
}

FusionConfig toy_config(double beta, bool freeze) {
  FusionConfig cfg;
  cfg.train = {.learning_rate = 0.01, .epochs = 5, .batch_size = 16, .rng_seed = 77};
  cfg.beta_init = beta;
  cfg.freeze_beta = freeze;
  cfg.beta_train.learning_rate = 0.05;
  return cfg;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("feature grouping") {
  const FeatureSchema a({{"c", FeatureKind::kNumeric, {}},
                         {"a", FeatureKind::kNumeric, {}},
                         {"b", FeatureKind::kCategorical, {"x", "y"}}});
  const FeatureSchema b({{"d", FeatureKind::kNumeric, {}},
                         {"b", FeatureKind::kCategorical, {"x", "y"}},
                         {"c", FeatureKind::kNumeric, {}}});
  const std::vector<FeatureSchema> both{a, b};
  const FeatureGrouping g = group_features(both);
  CHECK(g.global_features == std::vector<std::string>{"b", "c"});
  CHECK(g.local_features[0] == std::vector<std::string>{"b", "c", "a"});
  CHECK(g.local_features[1] == std::vector<std::string>{"b", "c", "d"});
  CHECK(g.unique_features[0] == std::vector<std::string>{"a"});
  CHECK(union_schema(both).names() == std::vector<std::string>{"a", "b", "c", "d"});

  const FeatureSchema kind_clash({{"c", FeatureKind::kCategorical, {"x"}}});
  const std::vector<FeatureSchema> clash{a, kind_clash};
  CHECK_THROWS_AS(group_features(clash), SchemaConflictError);
  const FeatureSchema cat_clash({{"b", FeatureKind::kCategorical, {"y", "x"}}});
  const std::vector<FeatureSchema> clash2{a, cat_clash};
  CHECK_THROWS_AS(group_features(clash2), SchemaConflictError);
  const FeatureSchema disjoint({{"z", FeatureKind::kNumeric, {}}});
  const std::vector<FeatureSchema> none{a, disjoint};
  CHECK_THROWS_AS(group_features(none), GroupingError);
  const std::vector<FeatureSchema> one{a};
  CHECK_THROWS_AS(group_features(one), GroupingError);
}

TEST_CASE("embeddings are the global model's last hidden layer") {
  nn::ModelParams g;
  g.layers.push_back({2, 2, {1.0, -1.0, 0.5, 2.0}, {0.0, -1.0}, nn::Activation::kRelu});
  g.layers.push_back({2, 1, {1.0, 1.0}, {0.0}, nn::Activation::kSigmoid});
  const Matrix x(2, 2, std::vector<double>{3.0, 1.0, -1.0, 0.5});
  const Matrix e = extract_embeddings(g, x);
  // Row 0: relu(3 - 1) = 2, relu(1.5 + 2 - 1) = 2.5. Row 1: relu(-1.5) = 0, relu(-0.5 + 1 - 1) = 0.
  CHECK(e == Matrix(2, 2, std::vector<double>{2.0, 2.5, 0.0, 0.0}));
  nn::ModelParams flat;
  flat.layers.push_back({2, 1, {1.0, 1.0}, {0.0}, nn::Activation::kSigmoid});
  CHECK_THROWS_AS(extract_embeddings(flat, x), ShapeError);
}

TEST_CASE("fusion loss composition and derivatives") {
  const std::vector<double> q{0.2, 0.7, 0.9, 0.4};
  const std::vector<double> p{0.3, 0.6, 0.8, 0.1};
  const std::vector<int> y{0, 1, 1, 0};
  const nn::ClassWeights w{0.5, 1.5};
  const FusionLoss l = fusion_loss(q, p, y, w, 2.0);
  CHECK(l.main == doctest::Approx(nn::weighted_bce_loss(q, y, w)));
  CHECK(l.fit == doctest::Approx(nn::weighted_bce_loss(p, y, w)));
  CHECK(l.prune == doctest::Approx(l.fit + l.agreement));
  CHECK(l.total == doctest::Approx(l.main + 2.0 * l.prune));
  CHECK(l.agreement > 0.0);
  CHECK(weighted_kl_divergence(p, p, y, w) == 0.0);

  // d total / d beta = l_prune.
  const double h = 1e-6;
  const double dbeta = (fusion_loss(q, p, y, w, 2.0 + h).total - fusion_loss(q, p, y, w, 2.0 - h).total) / (2 * h);
  CHECK(dbeta == doctest::Approx(l.prune).epsilon(1e-8));

  // d (l_main + beta * kl(p || q)) / d logit(q_i) = w_i (q_i - y_i + beta (q_i - p_i)) / n.
  const double beta = 2.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double z = std::log(q[i] / (1.0 - q[i]));
    auto at = [&](double zi) {
      std::vector<double> qq = q;
      qq[i] = sigmoid(zi);
      const FusionLoss f = fusion_loss(qq, p, y, w, beta);
      return f.main + beta * f.agreement;
    };
    const double fd = (at(z + h) - at(z - h)) / (2 * h);
    const double wi = y[i] == 1 ? w.positive : w.negative;
    const double analytic = wi * ((q[i] - y[i]) + beta * (q[i] - p[i])) / 4.0;
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-7));
  }
  CHECK_THROWS_AS(fusion_loss(q, p, y, w, -1.0), ConfigError);
}

TEST_CASE("prune net starts as the global head") {
  const Toy t = make_toy(1);
  const FusionState s = make_fusion_state(t.global, 5, kHidden, toy_config(1.0, false));
  CHECK(prune_input_dim(s) == 4 + kHidden.back());
  const Matrix e = extract_embeddings(t.global, t.x_global);
  const auto main_acts = nn::forward_batch(s.main_net, t.x_local);
  const auto prune = nn::predict_proba(s.prune_net, Matrix::hconcat(e, main_acts.last_hidden()));
  const auto hfl = baseline_hfl_predict(t.global, t.x_global);
  for (std::size_t i = 0; i < hfl.size(); ++i) CHECK(prune[i] == doctest::Approx(hfl[i]).epsilon(1e-14));
}

TEST_CASE("beta frozen at zero reproduces the localized baseline bitwise") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Toy t = make_toy(seed);
    const FusionConfig cfg = toy_config(0.0, true);
    const FusionResult fused = fusion_train(make_fusion_state(t.global, 5, kHidden, cfg), t.x_local,
                                            t.x_global, t.y, t.w, cfg);
    const nn::TrainResult local = baseline_localized(t.x_local, t.y, t.w, kHidden, cfg.train);
    CHECK(fused.state.main_net == local.params);
    CHECK(predict_lf2l(fused.state, t.x_local) == nn::predict_proba(local.params, t.x_local));
    for (std::size_t e = 0; e < local.epoch_losses.size(); ++e) {
      CHECK(fused.trace[e].l_main == local.epoch_losses[e]);
    }
  }
}

TEST_CASE("global model is frozen and prediction uses the main net only") {
  const Toy t = make_toy(3);
  const FusionConfig cfg = toy_config(2.0, false);
  const fed::Bytes before = fed::encode_params(t.global);
  const FusionResult r =
      fusion_train(make_fusion_state(t.global, 5, kHidden, cfg), t.x_local, t.x_global, t.y, t.w, cfg);
  CHECK(fed::encode_params(r.state.global_model) == before);

  const auto preds = predict_lf2l(r.state, t.x_local);
  FusionState scrambled = r.state;
  RandomEngine rng(5);
  scrambled.prune_net = oracle::random_net(rng, 1, 4);
  scrambled.beta = 9.0;
  scrambled.global_model = make_classifier(3, std::vector<std::size_t>{5}, 1234);
  CHECK(predict_lf2l(scrambled, t.x_local) == preds);

  FusionConfig uncached = cfg;
  uncached.cache_embeddings = false;
  const FusionResult r2 =
      fusion_train(make_fusion_state(t.global, 5, kHidden, cfg), t.x_local, t.x_global, t.y, t.w, uncached);
  CHECK(r2.state.main_net == r.state.main_net);
  CHECK(r2.state.prune_net == r.state.prune_net);
}

TEST_CASE("sgd on beta never increases it and respects the bounds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Toy t = make_toy(seed);
    FusionConfig cfg = toy_config(3.0, false);
    cfg.beta_max = 3.0;
    cfg.beta_train.learning_rate = 0.5;
    const FusionResult r =
        fusion_train(make_fusion_state(t.global, 5, kHidden, cfg), t.x_local, t.x_global, t.y, t.w, cfg);
    double prev = cfg.beta_init;
    for (double b : r.beta_steps) {
      CHECK(b <= prev);
      CHECK(b >= 0.0);
      CHECK(b <= cfg.beta_max);
      prev = b;
    }
    CHECK(r.beta_steps.back() < cfg.beta_init);
    CHECK(r.trace.back().beta == r.beta_steps.back());
  }
}

TEST_CASE("beta clamps at zero") {
  const Toy t = make_toy(2);
  FusionConfig cfg = toy_config(0.05, false);
  cfg.beta_train.learning_rate = 1.0;
  const FusionResult r =
      fusion_train(make_fusion_state(t.global, 5, kHidden, cfg), t.x_local, t.x_global, t.y, t.w, cfg);
  CHECK(r.beta_steps.back() == 0.0);
}

TEST_CASE("fusion input validation") {
  const Toy t = make_toy(1);
  const FusionConfig cfg = toy_config(1.0, false);
  const FusionState s = make_fusion_state(t.global, 5, kHidden, cfg);
  CHECK_THROWS_AS(fusion_train(s, t.x_global, t.x_global, t.y, t.w, cfg), ShapeError);
  const std::vector<int> short_y(t.y.begin(), t.y.end() - 1);
  CHECK_THROWS_AS(fusion_train(s, t.x_local, t.x_global, short_y, t.w, cfg), ShapeError);
  FusionConfig bad = cfg;
  bad.beta_init = 20.0;
  CHECK_THROWS_AS(make_fusion_state(t.global, 5, kHidden, bad), ConfigError);
  FusionState broken = s;
  broken.prune_net.layers.push_back(broken.prune_net.layers[0]);
  CHECK_THROWS_AS(broken.validate(), ShapeError);
}

TEST_CASE("centralized pooling fills absent features with UNKNOWN") {
  data::Dataset a, b;
  a.schema = FeatureSchema({{"x", FeatureKind::kNumeric, {}}, {"u", FeatureKind::kNumeric, {}}});
  b.schema = FeatureSchema({{"x", FeatureKind::kNumeric, {}}, {"v", FeatureKind::kNumeric, {}}});
  RandomEngine rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 40; ++i) {
    a.rows.push_back({g(rng), g(rng)});
    a.labels.push_back(i % 3 == 0);
  }
  for (int i = 0; i < 25; ++i) {
    b.rows.push_back({g(rng), g(rng)});
    b.labels.push_back(i % 4 == 0);
  }
  const auto aligned = align_to_schema(a, union_schema(std::vector<FeatureSchema>{a.schema, b.schema}));
  CHECK(aligned.schema.names() == std::vector<std::string>{"u", "v", "x"});
  CHECK(data::is_unknown(aligned.rows[0][1]));
  CHECK(aligned.rows[0][2] == a.rows[0][0]);

  const std::vector<data::Dataset> train{a, b};
  const std::vector<data::Dataset> test{a.subset(std::vector<std::size_t>{0, 1, 2, 3}),
                                        b.subset(std::vector<std::size_t>{0, 1, 2})};
  const nn::TrainConfig cfg{.learning_rate = 0.01, .epochs = 2, .batch_size = 16, .rng_seed = 3};
  const CentralizedResult r = baseline_centralized(train, test, kHidden, cfg, 0.999);
  CHECK(r.pooled_rows == 65);
  CHECK(r.unknown_cells == 65);
  CHECK(r.model.input_dim() == 6);
  CHECK(r.test_probs.size() == 2);
  CHECK(r.test_probs[0].size() == 4);
  CHECK(r.test_probs[1].size() == 3);
}
