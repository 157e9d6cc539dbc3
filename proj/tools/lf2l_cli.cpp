// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// lf2l: experiment runner and standalone federated server/client.
//
// Exit codes: 0 success, 2 config error, 3 protocol error, 4 data error,
// 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lf2l/error.hpp"
#include "lf2l/eval.hpp"
#include "lf2l/harness.hpp"

namespace {

using lf2l::harness::ExperimentConfig;

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;
constexpr int kExitData = 4;

// Top-level scalars that may be overridden from the command line. Flags win
// over the config file, which wins over built-in defaults.
struct Overrides {
  std::optional<std::string> run_id;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> workers;
  std::optional<std::string> transport;
  std::optional<double> train_frac;
  std::optional<double> beta_cb;
  std::optional<std::size_t> num_seeds;

  void add_to(CLI::App& app) {
    app.add_option("--run-id", run_id, "Output subdirectory name");
    app.add_option("--output-dir", output_dir, "Output root directory");
    app.add_option("--workers", workers, "Seeds run in parallel");
    app.add_option("--transport", transport, "Federated transport: inproc or tcp");
    app.add_option("--train-frac", train_frac, "Per-client training fraction");
    app.add_option("--beta-cb", beta_cb, "Class-balancing beta");
    app.add_option("--num-seeds", num_seeds, "Use seeds 1..N");
  }

  void apply(ExperimentConfig& cfg) const {
    if (run_id) cfg.run_id = *run_id;
    if (output_dir) cfg.output_dir = *output_dir;
    if (workers) cfg.workers = *workers;
    if (transport) cfg.transport = lf2l::fed::transport_from_string(*transport);
    if (train_frac) cfg.train_frac = *train_frac;
    if (beta_cb) cfg.beta_cb = *beta_cb;
    if (num_seeds) {
      cfg.seeds.clear();
      for (std::uint64_t s = 1; s <= *num_seeds; ++s) cfg.seeds.push_back(s);
    }
  }
};

ExperimentConfig make_config(const std::string& path, const Overrides& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : lf2l::harness::load_config(path);
  overrides.apply(cfg);
  cfg.validate();
  return cfg;
}

void print_summary(const lf2l::eval::MetricReport& report) {
  std::printf("%-8s %-12s %8s %8s %8s %8s\n", "client", "method", "auroc", "sd", "auprc", "sd");
  for (const auto& a : report.aggregates) {
    std::printf("%-8s %-12s %8.4f %8.4f %8.4f %8.4f\n", a.client_id.c_str(),
                std::string(lf2l::eval::to_string(a.method)).c_str(), a.auroc_mean, a.auroc_sd,
                a.auprc_mean, a.auprc_sd);
  }
  for (const auto& c : report.comparisons) {
    if (!c.defined) continue;
    std::printf("%-8s lf2l vs %-11s auroc t=%+.3f p=%.3g  auprc t=%+.3f p=%.3g\n",
                c.client_id.c_str(), std::string(lf2l::eval::to_string(c.baseline)).c_str(),
                c.auroc.t, c.auroc.p, c.auprc.t, c.auprc.p);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lf2l::ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-fusion federated learning experiments"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  CLI::App* run = app.add_subcommand("run", "Run the seed sweep and write reports");
  run->add_option("-c,--config", config_path, "Experiment config (JSON)");
  overrides.add_to(*run);

  lf2l::harness::ServeOptions serve_opts;
  std::string model_out;
  CLI::App* serve = app.add_subcommand("serve", "Run a federated server over TCP");
  serve->add_option("-c,--config", config_path, "Experiment config (JSON)");
  serve->add_option("--host", serve_opts.host, "Bind address")->capture_default_str();
  serve->add_option("--port", serve_opts.port, "Bind port (0: ephemeral)")->capture_default_str();
  serve->add_option("--seed", serve_opts.seed, "Experiment seed")->capture_default_str();
  serve->add_option("--model-out", model_out, "Write the final model here (codec format)");
  serve->add_option("--accept-timeout-ms", serve_opts.accept_timeout_ms,
                    "Give up waiting for clients after this long (-1: never)");
  overrides.add_to(*serve);

  lf2l::harness::JoinOptions join_opts;
  std::string join_model_out;
  CLI::App* join = app.add_subcommand("join", "Join a federated server as one client");
  join->add_option("-c,--config", config_path, "Experiment config (JSON)");
  join->add_option("--host", join_opts.host, "Server address")->capture_default_str();
  join->add_option("--port", join_opts.port, "Server port")->required();
  join->add_option("--seed", join_opts.seed, "Experiment seed")->capture_default_str();
  join->add_option("--client", join_opts.client_id, "Client id")->required();
  join->add_option("--connect-timeout-ms", join_opts.connect_timeout_ms,
                   "Retry connecting for this long")->capture_default_str();
  join->add_option("--model-out", join_model_out, "Write the final model here (codec format)");
  overrides.add_to(*join);

  std::string gen_dir;
  CLI::App* gen = app.add_subcommand("gen", "Write the synthetic clients as CSV + schema files");
  gen->add_option("-c,--config", config_path, "Experiment config (JSON) for the synthetic spec");
  gen->add_option("-o,--out", gen_dir, "Output directory")->required();

  std::string samples_path, report_out;
  CLI::App* report = app.add_subcommand("report", "Recompute aggregates from samples.csv");
  report->add_option("samples", samples_path, "samples.csv")->required();
  report->add_option("-o,--out", report_out, "Write report JSON here (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      const ExperimentConfig cfg = make_config(config_path, overrides);
      const auto result = lf2l::harness::run_experiment(cfg);
      const auto dir = lf2l::harness::write_outputs(cfg, result);
      print_summary(result.report);
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (*serve) {
      const ExperimentConfig cfg = make_config(config_path, overrides);
      serve_opts.model_out = model_out;
      lf2l::fed::TcpListener listener(serve_opts.host, serve_opts.port);
      std::printf("listening on %s:%u\n", serve_opts.host.c_str(), listener.port());
      std::fflush(stdout);
      const auto result = lf2l::harness::serve_fl(cfg, serve_opts, listener);
      std::printf("completed %zu rounds\n",
                  result.history.empty() ? std::size_t{0} : std::size_t{result.history.back().round});
    } else if (*join) {
      const ExperimentConfig cfg = make_config(config_path, overrides);
      const auto model = lf2l::harness::join_fl(cfg, join_opts);
      if (!join_model_out.empty()) lf2l::harness::write_model(join_model_out, model);
      std::printf("client %s done\n", join_opts.client_id.c_str());
    } else if (*gen) {
      const ExperimentConfig cfg =
          config_path.empty() ? ExperimentConfig{} : lf2l::harness::load_config(config_path);
      for (const auto& c : lf2l::harness::write_synthetic_csvs(cfg.synthetic, gen_dir)) {
        std::printf("%s %s %s\n", c.client_id.c_str(), c.csv.string().c_str(),
                    c.schema.string().c_str());
      }
    } else if (*report) {
      const auto samples = lf2l::eval::samples_from_csv(read_file(samples_path));
      const auto rep = lf2l::eval::aggregate_report(samples);
      const std::string text = lf2l::eval::report_to_json(rep);
      if (report_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream(report_out, std::ios::binary) << text;
        print_summary(rep);
      }
    }
  } catch (const lf2l::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const lf2l::ProtocolError& e) {
    std::fprintf(stderr, "protocol error: %s\n", e.what());
    return kExitProtocol;
  } catch (const lf2l::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const lf2l::MetricError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const lf2l::ReportError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
