// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner: checks every criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fails.
//
//   acceptance [--seeds N]   (N defaults to 30 for the headline run)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "lf2l/eval.hpp"
#include "lf2l/fed.hpp"
#include "lf2l/fusion.hpp"
#include "lf2l/harness.hpp"
#include "oracles.hpp"

using namespace lf2l;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

Outcome gradients() {
  const auto start = std::chrono::steady_clock::now();
  RandomEngine rng(2026);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const nn::ModelParams p = oracle::random_net(rng, 3, 16);
    const std::size_t n = 1 + rng() % 16;
    const Matrix x = oracle::random_matrix(rng, n, p.input_dim());
    const auto y = oracle::random_labels(rng, n);
    const nn::ClassWeights w{0.5 + 0.25 * uniform01(rng), 1.0 + uniform01(rng)};
    const auto analytic = oracle::flatten(nn::backward(p, x, y, w).gradient);
    const auto numeric = oracle::flatten(oracle::finite_difference_gradient(p, x, y, w, 1e-5));
    worst = std::max(worst, oracle::max_relative_error(analytic, numeric, 1e-6));
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 10.0, fmt("max rel err %.2e over 50 nets, %.2fs", worst, secs)};
}

Outcome class_weights() {
  const auto a = nn::class_balanced_weights({0.0, 3, 1});
  const auto b = nn::class_balanced_weights({0.9, 3, 1});
  const auto c = nn::class_balanced_weights({1.0 - 1e-9, 90, 10});
  const bool ok = a.negative == 1.0 && a.positive == 1.0 &&
                  std::abs(b.negative - 0.53906) <= 1e-4 && std::abs(b.positive - 1.46094) <= 1e-4 &&
                  std::abs(c.negative - 0.2) <= 1e-4 && std::abs(c.positive - 1.8) <= 1e-4;
  return {ok, fmt("(%.5f, %.5f) (%.5f, %.5f)", b.negative, b.positive, c.negative, c.positive)};
}

Outcome metrics() {
  RandomEngine rng(3);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng() % 99;
    const bool coarse = i % 2 == 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = coarse ? static_cast<double>(rng() % 5) : uniform01(rng);
      y[k] = static_cast<int>(rng() % 4 == 0);
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(eval::auroc(s, y) - oracle::brute_auroc(s, y)));
    worst = std::max(worst, std::abs(eval::auprc(s, y) - oracle::brute_auprc(s, y)));
  }
  const std::vector<int> y{0, 1, 0, 1, 1};
  const std::vector<double> perfect{0.1, 0.9, 0.2, 0.8, 0.7};
  const std::vector<double> constant(5, 0.3);
  const bool edges = eval::auroc(perfect, y) == 1.0 && eval::auprc(perfect, y) == 1.0 &&
                     eval::auroc(constant, y) == 0.5 && eval::auprc(constant, y) == 0.6;
  return {worst <= 1e-12 && edges, fmt("max |diff| %.2e over 200 instances", worst)};
}

Outcome fedavg_equivalence() {
  RandomEngine rng(4);
  std::vector<fed::ClientData> clients;
  for (const char* id : {"a", "b"}) {
    fed::ClientData d;
    d.client_id = id;
    const std::size_t n = 20 + rng() % 40;
    d.x = oracle::random_matrix(rng, n, 4);
    d.labels = oracle::random_labels(rng, n);
    d.labels[0] = 0;
    d.labels[1] = 1;
    d.weights = nn::class_balanced_weights(d.labels, 0.999);
    d.columns = {"c0", "c1", "c2", "c3"};
    clients.push_back(std::move(d));
  }
  fed::FedConfig cfg;
  cfg.rounds = 10;
  cfg.local_epochs = 1;
  cfg.client = {.learning_rate = 0.05, .batch_size = 1000, .optimizer = nn::OptimizerKind::kSgd};
  nn::ModelParams theta = fusion::make_classifier(4, std::vector<std::size_t>{8}, 1);
  fed::FedServer server(theta, cfg);
  fed::FedClient a(clients[0], cfg), b(clients[1], cfg);
  server.register_client(a.registration());
  server.register_client(b.registration());
  const double n_a = static_cast<double>(clients[0].labels.size());
  const double n_b = static_cast<double>(clients[1].labels.size());
  double worst = 0.0;
  for (int round = 0; round < 10; ++round) {
    const auto bc = server.broadcast();
    server.submit("a", a.train_round(bc));
    server.submit("b", b.train_round(bc));
    server.finish_round();
    const auto ga = oracle::flatten(nn::backward(theta, clients[0].x, clients[0].labels, clients[0].weights).gradient);
    const auto gb = oracle::flatten(nn::backward(theta, clients[1].x, clients[1].labels, clients[1].weights).gradient);
    auto expect = oracle::flatten(theta);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      expect[i] -= 0.05 * (n_a * ga[i] + n_b * gb[i]) / (n_a + n_b);
    }
    const auto got = oracle::flatten(server.model());
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - expect[i]));
    theta = server.model();
  }
  return {worst <= 1e-9, fmt("max |diff| %.2e over 10 rounds", worst)};
}

Outcome transport(const harness::ExperimentConfig& cfg, const harness::ClientSet& clients) {
  int identical = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const harness::PreparedSeed p = harness::prepare_seed(cfg, clients, seed);
    const std::size_t width = data::encoded_column_names(p.global_schema).size();
    const auto run = [&](fed::Transport t) {
      return fed::run_federated(harness::federated_inputs(p), harness::seed_global_init(cfg, seed, width),
                                harness::seed_fed_config(cfg, seed, p.clients.size()), t);
    };
    identical += fed::encode_params(run(fed::Transport::kInProc).global) ==
                 fed::encode_params(run(fed::Transport::kTcp).global);
  }
  return {identical == 5, fmt("%.0f/5 seeds bitwise identical", identical)};
}

struct SeedModels {
  harness::PreparedSeed prepared;
  nn::ModelParams global;
};

SeedModels federate(const harness::ExperimentConfig& cfg, const harness::ClientSet& clients,
                    std::uint64_t seed) {
  SeedModels m{harness::prepare_seed(cfg, clients, seed), {}};
  const std::size_t width = data::encoded_column_names(m.prepared.global_schema).size();
  m.global = fed::run_federated(harness::federated_inputs(m.prepared),
                                harness::seed_global_init(cfg, seed, width),
                                harness::seed_fed_config(cfg, seed, m.prepared.clients.size()),
                                fed::Transport::kInProc)
                 .global;
  return m;
}

Outcome fusion_off(const harness::ExperimentConfig& cfg, const SeedModels& m) {
  int equal = 0;
  for (std::size_t k = 0; k < m.prepared.clients.size(); ++k) {
    const auto& c = m.prepared.clients[k];
    fusion::FusionConfig f = harness::seed_fusion_config(cfg, 1, k);
    f.beta_init = 0.0;
    f.freeze_beta = true;
    const auto fused = fusion::fusion_train(
        fusion::make_fusion_state(m.global, c.local_train.cols(), cfg.main_hidden, f), c.local_train.x,
        c.global_train.x, c.local_train.labels, c.weights, f);
    const auto local = fusion::baseline_localized(c.local_train.x, c.local_train.labels, c.weights,
                                                  cfg.main_hidden, f.train);
    equal += fused.state.main_net == local.params &&
             fusion::predict_lf2l(fused.state, c.local_test.x) ==
                 nn::predict_proba(local.params, c.local_test.x);
  }
  return {equal == 2, fmt("%.0f/2 clients bitwise equal", equal)};
}

Outcome freeze_isolation(const harness::ExperimentConfig& cfg, const SeedModels& m) {
  const auto& c = m.prepared.clients[0];
  const fusion::FusionConfig f = harness::seed_fusion_config(cfg, 1, 0);
  const fed::Bytes before = fed::encode_params(m.global);
  const auto fused = fusion::fusion_train(
      fusion::make_fusion_state(m.global, c.local_train.cols(), cfg.main_hidden, f), c.local_train.x,
      c.global_train.x, c.local_train.labels, c.weights, f);
  const bool frozen = fed::encode_params(fused.state.global_model) == before &&
                      fed::encode_params(m.global) == before;
  const auto preds = fusion::predict_lf2l(fused.state, c.local_test.x);
  RandomEngine rng(7);
  bool invariant = true;
  for (int trial = 0; trial < 5; ++trial) {
    fusion::FusionState s = fused.state;
    for (auto& w : s.prune_net.layers[0].weights) w = 10.0 * (uniform01(rng) - 0.5);
    s.beta = f.beta_max * uniform01(rng);
    s.global_model = fusion::make_classifier(s.global_model.input_dim(), cfg.global_hidden, rng());
    invariant = invariant && fusion::predict_lf2l(s, c.local_test.x) == preds;
  }
  return {frozen && invariant, std::string(frozen ? "global frozen" : "global CHANGED") + ", " +
                                   (invariant ? "predictions invariant" : "predictions CHANGED")};
}

Outcome welch_example() {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> b{2, 3, 4, 5, 6};
  const auto r = eval::welch_t_test(a, b);
  // 40-digit reference for I_{8/9}(4, 1/2).
  const double reference = 0.3465935070873341341;
  const bool ok = std::abs(r.t + 1.0) < 1e-12 && std::abs(r.df - 8.0) < 1e-12 &&
                  std::abs(r.p - reference) < 1e-3 &&
                  std::abs(r.p - oracle::student_t_two_sided_even_df(-1.0, 8)) < 1e-3;
  return {ok, fmt("t=%.6f df=%.6f p=%.6f", r.t, r.df, r.p)};
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n_seeds = 30;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--seeds") == 0) n_seeds = std::strtoul(argv[i + 1], nullptr, 10);
  }

  int failures = 0;
  const auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  harness::ExperimentConfig cfg;
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= n_seeds; ++s) cfg.seeds.push_back(s);
  const harness::ClientSet clients = harness::load_clients(cfg);

  report(1, "gradient correctness", gradients());
  report(2, "class-balanced weights", class_weights());
  report(3, "metric oracles", metrics());
  report(4, "fedavg equivalence", fedavg_equivalence());
  report(5, "transport determinism", transport(cfg, clients));
  const SeedModels seed1 = federate(cfg, clients, 1);
  report(6, "fusion-off equivalence", fusion_off(cfg, seed1));
  report(7, "freeze and isolation", freeze_isolation(cfg, seed1));

  const auto start = std::chrono::steady_clock::now();
  const harness::ExperimentResult run = harness::run_experiment(cfg);
  const double secs = seconds_since(start);

  {
    bool ok = true;
    std::size_t steps = 0;
    for (const auto& s : run.seeds) {
      for (const auto& t : s.traces) {
        double prev = cfg.fusion.beta_init;
        for (double b : t.beta_steps) {
          ok = ok && b <= prev && b >= 0.0 && b <= cfg.fusion.beta_max;
          prev = b;
          ++steps;
        }
      }
    }
    report(8, "beta dynamics", {ok && steps > 0, fmt("%.0f beta steps checked", static_cast<double>(steps))});
  }

  {
    using eval::Method;
    const auto& rep = run.report;
    const double lf_s = rep.aggregate(Method::kLf2l, "small").auroc_mean;
    const double hfl_s = rep.aggregate(Method::kHfl, "small").auroc_mean;
    const double loc_s = rep.aggregate(Method::kLocalized, "small").auroc_mean;
    const double lf_l = rep.aggregate(Method::kLf2l, "large").auroc_mean;
    const double loc_l = rep.aggregate(Method::kLocalized, "large").auroc_mean;
    const double p_hfl = rep.comparison(Method::kHfl, "small").auroc.p;
    const double p_loc = rep.comparison(Method::kLocalized, "small").auroc.p;
    const double p_large = rep.comparison(Method::kLocalized, "large").auroc.p;
    const bool ok = lf_s > hfl_s && p_hfl < 0.05 && lf_s > loc_s && p_loc < 0.05 && lf_l >= loc_l &&
                    p_large < 0.05 && secs < 600.0;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%zu seeds in %.0fs; small lf2l %.4f vs hfl %.4f (p=%.2g), vs localized %.4f "
                  "(p=%.2g); large lf2l %.4f vs localized %.4f (p=%.2g)",
                  cfg.seeds.size(), secs, lf_s, hfl_s, p_hfl, loc_s, p_loc, lf_l, loc_l, p_large);
    report(9, "headline ordering", {ok, buf});
  }

  {
    using eval::Method;
    bool rows_ok = true;
    for (const auto& s : run.seeds) {
      const harness::PreparedSeed p = harness::prepare_seed(cfg, clients, s.seed);
      std::size_t expected = 0;
      for (const auto& c : p.clients) expected += c.split.train.size();
      rows_ok = rows_ok && s.pooled_rows == expected && s.pooled_unknown_cells > 0;
    }
    const double sd_c = run.report.aggregate(Method::kCentralized, "small").auroc_sd;
    const double sd_l = run.report.aggregate(Method::kLf2l, "small").auroc_sd;
    report(10, "centralized baseline",
           {rows_ok && sd_c > sd_l,
            std::string(rows_ok ? "pooled rows = n_A + n_B with UNKNOWN fill" : "pooled rows or UNKNOWN fill WRONG") +
                fmt("; small sd centralized %.4f vs lf2l %.4f", sd_c, sd_l)});
  }

  report(11, "welch worked example", welch_example());

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
