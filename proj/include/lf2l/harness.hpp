// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Config-driven experiment runner. A run loads (or generates) the client
// datasets once and, for every seed, splits each client 70/30, groups the
// features, trains the federated global model, then scores four methods on
// every client's held-out rows: localized, HFL, centralized pooling and LF2L.

#ifndef LF2L_HARNESS_HPP_
#define LF2L_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lf2l/datasets.hpp"
#include "lf2l/eval.hpp"
#include "lf2l/fed.hpp"
#include "lf2l/fusion.hpp"

namespace lf2l::harness {

struct CsvClient {
  std::string client_id;
  std::filesystem::path csv;
  std::filesystem::path schema;
};

struct ExperimentConfig {
  std::string data_source = "synthetic";  // "synthetic" | "csv"
  data::SyntheticSpec synthetic;
  std::vector<CsvClient> csv_clients;

  double train_frac = 0.7;
  std::vector<std::uint64_t> seeds;  // default 1..30
  double beta_cb = 0.999;

  fed::FedConfig fed;
  nn::TrainConfig local_train;  // localized, LF2L main/prune nets, centralized
  fusion::FusionConfig fusion;  // its `train` member is replaced by local_train

  std::vector<std::size_t> global_hidden{64, 32};
  std::vector<std::size_t> main_hidden{64, 32};

  fed::Transport transport = fed::Transport::kInProc;
  std::filesystem::path output_dir = "out";
  std::string run_id = "default";
  std::size_t workers = 1;

  ExperimentConfig();
  // Throws ConfigError on any invalid field.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ClientSet {
  std::vector<std::string> ids;
  std::vector<data::Dataset> datasets;
};

// Synthetic clients are named "small" and "large".
ClientSet load_clients(const ExperimentConfig& cfg);

// Client ids and schemas without reading any rows of CSV data.
struct ClientSchemas {
  std::vector<std::string> ids;
  std::vector<data::FeatureSchema> schemas;
};
ClientSchemas load_client_schemas(const ExperimentConfig& cfg);

// Writes <id>.csv and <id>.schema.json for both synthetic clients into
// `dir` and returns the matching csv client entries.
std::vector<CsvClient> write_synthetic_csvs(const data::SyntheticSpec& spec,
                                            const std::filesystem::path& dir);

// Everything one seed needs before training, for every client.
struct PreparedClient {
  std::string client_id;
  data::SplitResult split;
  data::EncodedMatrix global_train, global_test;
  data::EncodedMatrix local_train, local_test;
  nn::ClassWeights weights;
};

struct PreparedSeed {
  std::uint64_t seed = 0;
  fusion::FeatureGrouping grouping;
  data::FeatureSchema global_schema;
  std::vector<PreparedClient> clients;
};

PreparedSeed prepare_seed(const ExperimentConfig& cfg, const ClientSet& clients, std::uint64_t seed);

// Per-seed configs derived from the experiment config.
fed::FedConfig seed_fed_config(const ExperimentConfig& cfg, std::uint64_t seed,
                               std::size_t n_clients);
nn::ModelParams seed_global_init(const ExperimentConfig& cfg, std::uint64_t seed,
                                 std::size_t global_width);
nn::TrainConfig seed_local_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                  std::size_t client_index);
fusion::FusionConfig seed_fusion_config(const ExperimentConfig& cfg, std::uint64_t seed,
                                        std::size_t client_index);

std::vector<fed::ClientData> federated_inputs(const PreparedSeed& prepared);

struct ClientTrace {
  std::string client_id;
  std::vector<fusion::FusionEpoch> fusion;
  std::vector<double> beta_steps;
  std::vector<double> localized_losses;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<eval::MetricSample> samples;
  std::vector<fed::RoundLoss> fed_history;
  std::vector<ClientTrace> traces;
  nn::ModelParams global_model;
  std::size_t pooled_rows = 0;
  std::size_t pooled_unknown_cells = 0;
};

SeedResult run_seed(const ExperimentConfig& cfg, const ClientSet& clients, std::uint64_t seed);

struct ExperimentResult {
  eval::MetricReport report;
  std::vector<SeedResult> seeds;  // in cfg.seeds order
};

// Seeds run on `cfg.workers` threads; results do not depend on scheduling.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Writes <output_dir>/<run_id>/{config.json, samples.csv, report.json,
// traces/} and returns that directory.
std::filesystem::path write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

// ---------------------------------------------------------------------------
// Standalone federated processes. Both sides derive data, layout and
// hyperparameters from the same experiment config and seed, so a TCP session
// reproduces the in-process federated stage of run_seed bit for bit.

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::uint64_t seed = 1;
  std::filesystem::path model_out;  // empty: do not write
  int accept_timeout_ms = -1;
};

fed::FedResult serve_fl(const ExperimentConfig& cfg, const ServeOptions& options,
                        fed::TcpListener& listener);

struct JoinOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::uint64_t seed = 1;
  std::string client_id;
  int connect_timeout_ms = 10000;
};

nn::ModelParams join_fl(const ExperimentConfig& cfg, const JoinOptions& options);

void write_model(const std::filesystem::path& path, const nn::ModelParams& model);
nn::ModelParams read_model(const std::filesystem::path& path);

}  // namespace lf2l::harness

#endif  // LF2L_HARNESS_HPP_
