// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/harness.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "lf2l/error.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::harness {
namespace {

using nlohmann::json;

constexpr std::uint64_t kGlobalInitStream = 1000;
constexpr std::uint64_t kFedShuffleStream = 1001;
constexpr std::uint64_t kLocalStreamBase = 2000;
constexpr std::uint64_t kCentralizedStream = 3000;

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
void read(const json& j, std::string_view key, T& out) {
  auto it = j.find(key);
  if (it != j.end()) out = it->template get<T>();
}

json train_to_json(const nn::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"optimizer", std::string(nn::to_string(t.optimizer))},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_epsilon", t.adam_epsilon}};
}

void train_from_json(const json& j, std::string_view where, nn::TrainConfig& t) {
  check_keys(j, where,
             {"learning_rate", "epochs", "batch_size", "optimizer", "adam_beta1", "adam_beta2",
              "adam_epsilon"});
  read(j, "learning_rate", t.learning_rate);
  read(j, "epochs", t.epochs);
  read(j, "batch_size", t.batch_size);
  if (j.contains("optimizer")) t.optimizer = nn::optimizer_from_string(j["optimizer"].get<std::string>());
  read(j, "adam_beta1", t.adam_beta1);
  read(j, "adam_beta2", t.adam_beta2);
  read(j, "adam_epsilon", t.adam_epsilon);
}

json synthetic_to_json(const data::SyntheticSpec& s) {
  return {{"latent_dim", s.latent_dim},
          {"n_small", s.n_small},
          {"n_large", s.n_large},
          {"prevalence_target", s.prevalence_target},
          {"n_common", s.n_common},
          {"n_unique_small", s.n_unique_small},
          {"n_unique_large", s.n_unique_large},
          {"noise_sd", s.noise_sd},
          {"small_unique_noise_factor", s.small_unique_noise_factor},
          {"large_unique_noise_factor", s.large_unique_noise_factor},
          {"signal_scale", s.signal_scale},
          {"common_signal_fraction", s.common_signal_fraction},
          {"interaction_scale", s.interaction_scale},

          {"categorical_levels", s.categorical_levels},
          {"identity_common_projection", s.identity_common_projection},
          {"seed", s.seed}};
}

void synthetic_from_json(const json& j, data::SyntheticSpec& s) {
  check_keys(j, "data.synthetic",
             {"latent_dim", "n_small", "n_large", "prevalence_target", "n_common",
              "n_unique_small", "n_unique_large", "noise_sd", "small_unique_noise_factor",
              "large_unique_noise_factor", "signal_scale", "common_signal_fraction", "interaction_scale", "categorical_levels",
              "identity_common_projection", "seed"});
  read(j, "latent_dim", s.latent_dim);
  read(j, "n_small", s.n_small);
  read(j, "n_large", s.n_large);
  read(j, "prevalence_target", s.prevalence_target);
  read(j, "n_common", s.n_common);
  read(j, "n_unique_small", s.n_unique_small);
  read(j, "n_unique_large", s.n_unique_large);
  read(j, "noise_sd", s.noise_sd);
  read(j, "small_unique_noise_factor", s.small_unique_noise_factor);
  read(j, "large_unique_noise_factor", s.large_unique_noise_factor);
  read(j, "signal_scale", s.signal_scale);
  read(j, "common_signal_fraction", s.common_signal_fraction);
  read(j, "interaction_scale", s.interaction_scale);

  read(j, "categorical_levels", s.categorical_levels);
  read(j, "identity_common_projection", s.identity_common_projection);
  read(j, "seed", s.seed);
}

// Rethrows module errors with the failing stage prepended, keeping the
// error family so the CLI exit code is unchanged.
template <typename F>
auto in_context(const std::string& context, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError(context + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::size_t client_index(const std::vector<std::string>& ids, std::string_view id) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] == id) return k;
  }
  throw ConfigError("unknown client id \"" + std::string(id) + "\"");
}

json trace_to_json(const SeedResult& r) {
  json j;
  j["seed"] = r.seed;
  j["pooled_rows"] = r.pooled_rows;
  j["fed_history"] = json::array();
  for (const auto& h : r.fed_history) {
    j["fed_history"].push_back({{"round", h.round}, {"client", h.client_id}, {"loss", h.loss}});
  }
  j["clients"] = json::array();
  for (const auto& t : r.traces) {
    json c;
    c["client"] = t.client_id;
    c["localized_loss"] = t.localized_losses;
    c["beta_steps"] = t.beta_steps;
    c["fusion"] = json::array();
    for (const auto& e : t.fusion) {
      c["fusion"].push_back({{"l_main", e.l_main}, {"l_prune", e.l_prune}, {"beta", e.beta}});
    }
    j["clients"].push_back(std::move(c));
  }
  return j;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (std::uint64_t s = 1; s <= 30; ++s) seeds.push_back(s);
  fed.rounds = 20;
  fed.local_epochs = 1;
  fed.client.learning_rate = 1e-3;
  fed.client.batch_size = 64;
  local_train.learning_rate = 1e-3;
  local_train.epochs = 60;
  local_train.batch_size = 64;
  fusion.beta_init = 4.0;
}

void ExperimentConfig::validate() const {
  if (data_source == "synthetic") {
    synthetic.validate();
  } else if (data_source == "csv") {
    if (csv_clients.size() < 2) throw ConfigError("csv source needs at least two clients");
    std::set<std::string> ids;
    for (const auto& c : csv_clients) {
      if (c.client_id.empty()) throw ConfigError("client id must be nonempty");
      if (!ids.insert(c.client_id).second) throw ConfigError("duplicate client id " + c.client_id);
      if (!std::filesystem::exists(c.csv)) throw ConfigError("missing file " + c.csv.string());
      if (!std::filesystem::exists(c.schema)) throw ConfigError("missing file " + c.schema.string());
    }
  } else {
    throw ConfigError("data source must be \"synthetic\" or \"csv\", got \"" + data_source + "\"");
  }
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (!(beta_cb >= 0.0 && beta_cb < 1.0)) throw ConfigError("beta_cb must lie in [0, 1)");
  fed.validate();
  local_train.validate();
  fusion::FusionConfig f = fusion;
  f.train = local_train;
  f.validate();
  if (global_hidden.empty() || main_hidden.empty()) {
    throw ConfigError("global and main nets need at least one hidden layer");
  }
  for (std::size_t w : global_hidden) if (w == 0) throw ConfigError("hidden widths must be positive");
  for (std::size_t w : main_hidden) if (w == 0) throw ConfigError("hidden widths must be positive");
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id == "." || run_id == "..") {
    throw ConfigError("run_id must be a plain directory name");
  }
  if (workers == 0) throw ConfigError("workers must be at least 1");
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["data"]["source"] = cfg.data_source;
  j["data"]["synthetic"] = synthetic_to_json(cfg.synthetic);
  j["data"]["clients"] = json::array();
  for (const auto& c : cfg.csv_clients) {
    j["data"]["clients"].push_back(
        {{"id", c.client_id}, {"csv", c.csv.string()}, {"schema", c.schema.string()}});
  }
  j["train_frac"] = cfg.train_frac;
  j["seeds"] = cfg.seeds;
  j["beta_cb"] = cfg.beta_cb;
  j["fed"] = {{"rounds", cfg.fed.rounds},
              {"local_epochs", cfg.fed.local_epochs},
              {"train", train_to_json(cfg.fed.client)}};
  j["local_train"] = train_to_json(cfg.local_train);
  j["fusion"] = {{"beta_init", cfg.fusion.beta_init},
                 {"beta_max", cfg.fusion.beta_max},
                 {"beta_learning_rate", cfg.fusion.beta_train.learning_rate},
                 {"beta_optimizer", std::string(nn::to_string(cfg.fusion.beta_train.optimizer))},
                 {"freeze_beta", cfg.fusion.freeze_beta},
                 {"cache_embeddings", cfg.fusion.cache_embeddings}};
  j["architecture"] = {{"global_hidden", cfg.global_hidden}, {"main_hidden", cfg.main_hidden}};
  j["transport"] = std::string(fed::to_string(cfg.transport));
  j["output_dir"] = cfg.output_dir.string();
  j["run_id"] = cfg.run_id;
  j["workers"] = cfg.workers;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    check_keys(j, "config",
               {"data", "train_frac", "seeds", "beta_cb", "fed", "local_train", "fusion",
                "architecture", "transport", "output_dir", "run_id", "workers"});
    if (j.contains("data")) {
      const json& d = j["data"];
      check_keys(d, "data", {"source", "synthetic", "clients"});
      read(d, "source", cfg.data_source);
      if (d.contains("synthetic")) synthetic_from_json(d["synthetic"], cfg.synthetic);
      if (d.contains("clients")) {
        for (const json& c : d["clients"]) {
          check_keys(c, "data.clients[]", {"id", "csv", "schema"});
          CsvClient client;
          client.client_id = c.at("id").get<std::string>();
          client.csv = c.at("csv").get<std::string>();
          client.schema = c.at("schema").get<std::string>();
          cfg.csv_clients.push_back(std::move(client));
        }
      }
    }
    read(j, "train_frac", cfg.train_frac);
    read(j, "seeds", cfg.seeds);
    read(j, "beta_cb", cfg.beta_cb);
    if (j.contains("fed")) {
      const json& f = j["fed"];
      check_keys(f, "fed", {"rounds", "local_epochs", "train"});
      read(f, "rounds", cfg.fed.rounds);
      read(f, "local_epochs", cfg.fed.local_epochs);
      if (f.contains("train")) train_from_json(f["train"], "fed.train", cfg.fed.client);
    }
    if (j.contains("local_train")) train_from_json(j["local_train"], "local_train", cfg.local_train);
    if (j.contains("fusion")) {
      const json& f = j["fusion"];
      check_keys(f, "fusion",
                 {"beta_init", "beta_max", "beta_learning_rate", "beta_optimizer", "freeze_beta",
                  "cache_embeddings"});
      read(f, "beta_init", cfg.fusion.beta_init);
      read(f, "beta_max", cfg.fusion.beta_max);
      read(f, "beta_learning_rate", cfg.fusion.beta_train.learning_rate);
      if (f.contains("beta_optimizer")) {
        cfg.fusion.beta_train.optimizer =
            nn::optimizer_from_string(f["beta_optimizer"].get<std::string>());
      }
      read(f, "freeze_beta", cfg.fusion.freeze_beta);
      read(f, "cache_embeddings", cfg.fusion.cache_embeddings);
    }
    if (j.contains("architecture")) {
      const json& a = j["architecture"];
      check_keys(a, "architecture", {"global_hidden", "main_hidden"});
      read(a, "global_hidden", cfg.global_hidden);
      read(a, "main_hidden", cfg.main_hidden);
    }
    if (j.contains("transport")) {
      cfg.transport = fed::transport_from_string(j["transport"].get<std::string>());
    }
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    read(j, "run_id", cfg.run_id);
    read(j, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const std::filesystem::path base = path.parent_path();
  for (auto& c : cfg.csv_clients) {
    if (c.csv.is_relative()) c.csv = base / c.csv;
    if (c.schema.is_relative()) c.schema = base / c.schema;
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

ClientSet load_clients(const ExperimentConfig& cfg) {
  ClientSet out;
  if (cfg.data_source == "synthetic") {
    data::SyntheticClients s = data::generate_synthetic(cfg.synthetic);
    out.ids = {"small", "large"};
    out.datasets.push_back(std::move(s.small));
    out.datasets.push_back(std::move(s.large));
    return out;
  }
  for (const auto& c : cfg.csv_clients) {
    out.ids.push_back(c.client_id);
    out.datasets.push_back(
        in_context("client " + c.client_id, [&] { return data::load_csv(c.csv, c.schema); }));
  }
  return out;
}

ClientSchemas load_client_schemas(const ExperimentConfig& cfg) {
  ClientSchemas out;
  if (cfg.data_source == "synthetic") {
    ClientSet set = load_clients(cfg);
    out.ids = std::move(set.ids);
    for (auto& ds : set.datasets) out.schemas.push_back(std::move(ds.schema));
    return out;
  }
  for (const auto& c : cfg.csv_clients) {
    out.ids.push_back(c.client_id);
    out.schemas.push_back(
        in_context("client " + c.client_id, [&] { return data::load_schema_file(c.schema).schema; }));
  }
  return out;
}

std::vector<CsvClient> write_synthetic_csvs(const data::SyntheticSpec& spec,
                                            const std::filesystem::path& dir) {
  const data::SyntheticClients s = data::generate_synthetic(spec);
  std::filesystem::create_directories(dir);
  std::vector<CsvClient> out;
  for (const auto& [id, ds] : {std::pair<std::string, const data::Dataset*>{"small", &s.small},
                               std::pair<std::string, const data::Dataset*>{"large", &s.large}}) {
    CsvClient c{id, dir / (id + ".csv"), dir / (id + ".schema.json")};
    write_text(c.csv, data::to_csv(*ds, "label"));
    write_text(c.schema, data::schema_to_json({"label", ds->schema}));
    out.push_back(std::move(c));
  }
  return out;
}

PreparedSeed prepare_seed(const ExperimentConfig& cfg, const ClientSet& clients,
                          std::uint64_t seed) {
  const std::size_t n = clients.datasets.size();
  PreparedSeed out;
  out.seed = seed;

  std::vector<data::FeatureSchema> schemas;
  for (const auto& ds : clients.datasets) schemas.push_back(ds.schema);
  out.grouping = fusion::group_features(schemas);
  out.global_schema = clients.datasets[0].schema.select(out.grouping.global_features);

  for (std::size_t k = 0; k < n; ++k) {
    const std::string& id = clients.ids[k];
    PreparedClient pc = in_context("seed " + std::to_string(seed) + " client " + id, [&] {
      PreparedClient c;
      c.client_id = id;
      c.split = data::stratified_split(clients.datasets[k], cfg.train_frac, derive_seed(seed, k));

      const data::Dataset g_train = c.split.train.project(out.grouping.global_features);
      const data::Encoder g_enc = data::Encoder::fit(g_train);
      c.global_train = g_enc.encode(g_train);
      c.global_test = g_enc.encode(c.split.test.project(out.grouping.global_features));

      const data::Dataset l_train = c.split.train.project(out.grouping.local_features[k]);
      const data::Encoder l_enc = data::Encoder::fit(l_train);
      c.local_train = l_enc.encode(l_train);
      c.local_test = l_enc.encode(c.split.test.project(out.grouping.local_features[k]));

      c.weights = nn::class_balanced_weights(c.split.train.labels, cfg.beta_cb);
      return c;
    });
    out.clients.push_back(std::move(pc));
  }
  return out;
}

fed::FedConfig seed_fed_config(const ExperimentConfig& cfg, std::uint64_t seed,
                               std::size_t n_clients) {
  fed::FedConfig f = cfg.fed;
  f.client.rng_seed = derive_seed(seed, kFedShuffleStream);
  f.expected_clients = n_clients;
  return f;
}

nn::ModelParams seed_global_init(const ExperimentConfig& cfg, std::uint64_t seed,
                                 std::size_t global_width) {
  return fusion::make_classifier(global_width, cfg.global_hidden,
                                 derive_seed(seed, kGlobalInitStream));
}

nn::TrainConfig seed_local_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                  std::size_t client_index) {
  nn::TrainConfig t = cfg.local_train;
  t.rng_seed = derive_seed(seed, kLocalStreamBase + client_index);
  return t;
}

fusion::FusionConfig seed_fusion_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                        std::size_t client_index) {
  fusion::FusionConfig f = cfg.fusion;
  f.train = seed_local_config(cfg, seed, client_index);
  return f;
}

std::vector<fed::ClientData> federated_inputs(const PreparedSeed& prepared) {
  std::vector<fed::ClientData> out;
  for (const auto& c : prepared.clients) {
    fed::ClientData d;
    d.client_id = c.client_id;
    d.x = c.global_train.x;
    d.labels = c.global_train.labels;
    d.weights = c.weights;
    d.columns = c.global_train.column_names;
    out.push_back(std::move(d));
  }
  return out;
}

SeedResult run_seed(const ExperimentConfig& cfg, const ClientSet& clients, std::uint64_t seed) {
  const std::string ctx = "seed " + std::to_string(seed);
  const PreparedSeed prepared = in_context(ctx, [&] { return prepare_seed(cfg, clients, seed); });
  const std::size_t n = prepared.clients.size();

  SeedResult result;
  result.seed = seed;

  const std::size_t global_width = data::encoded_column_names(prepared.global_schema).size();
  const fed::FedResult fl = in_context(ctx + " method hfl", [&] {
    return fed::run_federated(federated_inputs(prepared), seed_global_init(cfg, seed, global_width),
                              seed_fed_config(cfg, seed, n), cfg.transport);
  });
  result.global_model = fl.global;
  result.fed_history = fl.history;

  auto add = [&](eval::Method method, const PreparedClient& c, std::span<const double> probs) {
    const auto& labels = c.split.test.labels;
    in_context(ctx + " method " + std::string(eval::to_string(method)) + " client " + c.client_id,
               [&] {
                 result.samples.push_back({method, c.client_id, seed, eval::auroc(probs, labels),
                                           eval::auprc(probs, labels)});
               });
  };

  for (std::size_t k = 0; k < n; ++k) {
    const PreparedClient& c = prepared.clients[k];
    const std::string cctx = ctx + " client " + c.client_id;
    ClientTrace trace;
    trace.client_id = c.client_id;

    add(eval::Method::kHfl, c, fusion::baseline_hfl_predict(fl.global, c.global_test.x));

    const nn::TrainResult local = in_context(cctx + " method localized", [&] {
      return fusion::baseline_localized(c.local_train.x, c.local_train.labels, c.weights,
                                        cfg.main_hidden, seed_local_config(cfg, seed, k));
    });
    trace.localized_losses = local.epoch_losses;
    add(eval::Method::kLocalized, c, nn::predict_proba(local.params, c.local_test.x));

    const fusion::FusionResult fused = in_context(cctx + " method lf2l", [&] {
      const fusion::FusionConfig fcfg = seed_fusion_config(cfg, seed, k);
      fusion::FusionState state =
          fusion::make_fusion_state(fl.global, c.local_train.cols(), cfg.main_hidden, fcfg);
      return fusion::fusion_train(std::move(state), c.local_train.x, c.global_train.x,
                                  c.local_train.labels, c.weights, fcfg);
    });
    trace.fusion = fused.trace;
    trace.beta_steps = fused.beta_steps;
    add(eval::Method::kLf2l, c, fusion::predict_lf2l(fused.state, c.local_test.x));

    result.traces.push_back(std::move(trace));
  }

  const fusion::CentralizedResult central = in_context(ctx + " method centralized", [&] {
    std::vector<data::Dataset> train, test;
    for (const auto& c : prepared.clients) {
      train.push_back(c.split.train);
      test.push_back(c.split.test);
    }
    nn::TrainConfig t = cfg.local_train;
    t.rng_seed = derive_seed(seed, kCentralizedStream);
    return fusion::baseline_centralized(train, test, cfg.main_hidden, t, cfg.beta_cb);
  });
  result.pooled_rows = central.pooled_rows;
  result.pooled_unknown_cells = central.unknown_cells;
  for (std::size_t k = 0; k < n; ++k) {
    add(eval::Method::kCentralized, prepared.clients[k], central.test_probs[k]);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ClientSet clients = load_clients(cfg);

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = run_seed(cfg, clients, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.workers, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult out;
  std::vector<eval::MetricSample> samples;
  for (const auto& r : results) samples.insert(samples.end(), r.samples.begin(), r.samples.end());
  out.report = eval::aggregate_report(std::move(samples));
  out.seeds = std::move(results);
  return out;
}

std::filesystem::path write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  const std::filesystem::path dir = cfg.output_dir / cfg.run_id;
  std::filesystem::create_directories(dir / "traces");
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  write_text(dir / "samples.csv", eval::samples_to_csv(result.report.samples));
  write_text(dir / "report.json", eval::report_to_json(result.report));
  for (const auto& r : result.seeds) {
    write_text(dir / "traces" / ("seed_" + std::to_string(r.seed) + ".json"),
               trace_to_json(r).dump(1) + "\n");
  }
  return dir;
}

// ---------------------------------------------------------------------------

fed::FedResult serve_fl(const ExperimentConfig& cfg, const ServeOptions& options,
                        fed::TcpListener& listener) {
  cfg.validate();
  const ClientSchemas schemas = load_client_schemas(cfg);
  const fusion::FeatureGrouping grouping = fusion::group_features(schemas.schemas);
  const std::vector<std::string> columns =
      data::encoded_column_names(schemas.schemas[0].select(grouping.global_features));

  fed::FedServer server(seed_global_init(cfg, options.seed, columns.size()),
                        seed_fed_config(cfg, options.seed, schemas.ids.size()), columns);
  fed::FedResult result = fed::serve_tcp(server, listener, options.accept_timeout_ms);
  if (!options.model_out.empty()) write_model(options.model_out, result.global);
  return result;
}

nn::ModelParams join_fl(const ExperimentConfig& cfg, const JoinOptions& options) {
  cfg.validate();
  const ClientSet clients = load_clients(cfg);
  const std::size_t k = client_index(clients.ids, options.client_id);
  const PreparedSeed prepared = prepare_seed(cfg, clients, options.seed);
  std::vector<fed::ClientData> inputs = federated_inputs(prepared);
  fed::FedClient client(std::move(inputs[k]), seed_fed_config(cfg, options.seed, clients.ids.size()));
  return fed::join_tcp(client, options.host, options.port, options.connect_timeout_ms);
}

void write_model(const std::filesystem::path& path, const nn::ModelParams& model) {
  const fed::Bytes bytes = fed::encode_params(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_text(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

nn::ModelParams read_model(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return fed::decode_params(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace lf2l::harness
