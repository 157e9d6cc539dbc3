// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Horizontal federated learning on the shared (global) feature group:
// sample-count-weighted FedAvg, the binary parameter codec, the framed wire
// protocol, and synchronous client/server state machines driven either
// in-process or over TCP.
//
// Wire frame: u32 little-endian payload length, u8 message type, payload.
// Parameter payload: u32 layer count, then per layer u32 out, u32 in,
// u8 activation tag, out*in row-major weights and out biases as IEEE-754
// little-endian f64.

#ifndef LF2L_FED_HPP_
#define LF2L_FED_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lf2l/matrix.hpp"
#include "lf2l/nn.hpp"

namespace lf2l::fed {

using Bytes = std::vector<std::uint8_t>;

struct FedConfig {
  std::size_t rounds = 20;
  std::size_t local_epochs = 1;
  nn::TrainConfig client;
  std::size_t expected_clients = 2;

  void validate() const;
};

// Client-side training config: the shared config with a per-client shuffle
// seed derived from the client id, so results do not depend on client order
// or transport.
nn::TrainConfig client_train_config(const FedConfig& cfg, std::string_view client_id);

struct RoundUpdate {
  std::string client_id;
  std::uint32_t round = 0;
  nn::ModelParams params;
  std::uint64_t sample_count = 0;
  double train_loss = 0.0;
};

// n_k / sum_j n_j for updates already in ascending client_id order.
std::vector<double> aggregation_coefficients(std::span<const RoundUpdate> sorted_updates);

// theta = sum_k (n_k / N) theta_k, summed in ascending client_id order.
// Throws ProtocolError on mixed rounds, shape mismatch or duplicate ids.
nn::ModelParams fedavg_aggregate(std::vector<RoundUpdate> updates);

// ---------------------------------------------------------------------------
// Codec.

Bytes encode_params(const nn::ModelParams& params);
nn::ModelParams decode_params(std::span<const std::uint8_t> bytes);

// Little-endian cursor over a byte buffer; every read throws CodecError
// when the buffer is exhausted.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string string();
  nn::ModelParams params();

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void string(std::string_view s);
  void params(const nn::ModelParams& p);

  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

// ---------------------------------------------------------------------------
// Wire protocol.

enum class MessageType : std::uint8_t {
  kRegister = 1,
  kModelBroadcast = 2,
  kUpdate = 3,
  kDone = 4,
  kError = 5,
};

std::string_view to_string(MessageType type);

struct WireMessage {
  MessageType type = MessageType::kError;
  Bytes payload;
};

inline constexpr std::size_t kFrameHeaderSize = 5;
// Upper bound on a payload; larger prefixes are treated as corruption.
inline constexpr std::uint32_t kMaxPayloadBytes = 1u << 30;

Bytes frame(const WireMessage& message);
// Parses one frame from the front of `buffer`. Returns the message and the
// number of bytes consumed, or nullopt when the buffer holds a partial frame.
std::optional<std::pair<WireMessage, std::size_t>> parse_frame(std::span<const std::uint8_t> buffer);

struct RegisterPayload {
  std::string client_id;
  std::uint64_t sample_count = 0;
  std::vector<std::string> columns;  // encoded global-feature column layout
};

struct BroadcastPayload {
  std::uint32_t round = 0;
  nn::ModelParams params;
};

struct UpdatePayload {
  std::uint32_t round = 0;
  std::uint64_t sample_count = 0;
  double train_loss = 0.0;
  nn::ModelParams params;
};

WireMessage make_register(const RegisterPayload& p);
WireMessage make_broadcast(const BroadcastPayload& p);
WireMessage make_update(const UpdatePayload& p);
WireMessage make_done(const nn::ModelParams& final_model);
WireMessage make_error(std::string_view text);

RegisterPayload parse_register(const WireMessage& m);
BroadcastPayload parse_broadcast(const WireMessage& m);
UpdatePayload parse_update(const WireMessage& m);
nn::ModelParams parse_done(const WireMessage& m);
std::string parse_error(const WireMessage& m);

// ---------------------------------------------------------------------------
// Participants.

struct ClientData {
  std::string client_id;
  Matrix x;  // global-feature columns of the client's training rows
  std::vector<int> labels;
  nn::ClassWeights weights;
  std::vector<std::string> columns;
};

class FedClient {
 public:
  FedClient(ClientData data, const FedConfig& cfg);

  RegisterPayload registration() const;
  // Adopts the broadcast model and trains `local_epochs` epochs on it.
  // Optimizer state and shuffle stream carry over between rounds.
  UpdatePayload train_round(const BroadcastPayload& broadcast);

  const std::string& id() const { return data_.client_id; }

 private:
  ClientData data_;
  FedConfig cfg_;
  std::optional<nn::Trainer> trainer_;
};

struct RoundLoss {
  std::uint32_t round = 0;
  std::string client_id;
  double loss = 0.0;
};

// Synchronous-by-round FedAvg server. Rounds are numbered from 1.
class FedServer {
 public:
  // `expected_columns` pins the global layout; when empty the first
  // registration defines it.
  FedServer(nn::ModelParams initial, FedConfig cfg,
            std::optional<std::vector<std::string>> expected_columns = std::nullopt);

  void register_client(const RegisterPayload& registration);
  bool ready() const { return registered_.size() == cfg_.expected_clients; }
  const std::vector<std::string>& client_ids() const { return registered_; }

  BroadcastPayload broadcast() const;
  void submit(const std::string& client_id, const UpdatePayload& update);
  bool round_complete() const { return pending_.size() == cfg_.expected_clients; }
  // Aggregates the pending updates and advances the round counter.
  void finish_round();

  bool done() const { return round_ > cfg_.rounds; }
  std::uint32_t round() const { return round_; }
  const nn::ModelParams& model() const { return model_; }
  const std::vector<RoundLoss>& history() const { return history_; }

 private:
  nn::ModelParams model_;
  FedConfig cfg_;
  std::optional<std::vector<std::string>> columns_;
  std::vector<std::string> registered_;
  std::vector<std::uint64_t> sample_counts_;
  std::vector<RoundUpdate> pending_;
  std::vector<RoundLoss> history_;
  std::uint32_t round_ = 1;
};

struct FedResult {
  nn::ModelParams global;
  std::vector<RoundLoss> history;
};

enum class Transport { kInProc, kTcp };

std::string_view to_string(Transport transport);
Transport transport_from_string(std::string_view name);

FedResult run_federated(std::vector<ClientData> clients, nn::ModelParams initial,
                        const FedConfig& cfg, Transport transport);

// ---------------------------------------------------------------------------
// TCP transport.

class TcpListener {
 public:
  // Port 0 binds an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Blocks up to `timeout_ms` (-1: forever) for the next connection.
  int accept_fd(int timeout_ms = -1);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Runs the server side to completion over accepted connections.
// Any failure is reported to every connected client with an Error message
// before the ProtocolError propagates.
FedResult serve_tcp(FedServer& server, TcpListener& listener, int accept_timeout_ms = -1);

// Connects (retrying until `connect_timeout_ms`), registers, trains every
// broadcast round and returns the final model delivered with Done.
nn::ModelParams join_tcp(FedClient& client, const std::string& host, std::uint16_t port,
                         int connect_timeout_ms = 10000);

}  // namespace lf2l::fed

#endif  // LF2L_FED_HPP_
