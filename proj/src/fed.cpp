// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/fed.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include "lf2l/error.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::fed {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the codec assumes a little-endian host");

// FNV-1a, stable across platforms.
std::uint64_t hash_id(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool same_architecture(const nn::ModelParams& a, const nn::ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.in != y.in || x.out != y.out || x.activation != y.activation) return false;
  }
  return true;
}

WireMessage expect_type(const WireMessage& m, MessageType type) {
  if (m.type != type) {
    throw ProtocolError("expected " + std::string(to_string(type)) + " message, got " +
                        std::string(to_string(m.type)));
  }
  return m;
}

}  // namespace

void FedConfig::validate() const {
  if (rounds == 0) throw ConfigError("rounds must be at least 1");
  if (local_epochs == 0) throw ConfigError("local_epochs must be at least 1");
  if (expected_clients == 0) throw ConfigError("expected_clients must be at least 1");
  client.validate();
}

nn::TrainConfig client_train_config(const FedConfig& cfg, std::string_view client_id) {
  nn::TrainConfig out = cfg.client;
  out.rng_seed = derive_seed(cfg.client.rng_seed, hash_id(client_id));
  return out;
}

std::vector<double> aggregation_coefficients(std::span<const RoundUpdate> sorted_updates) {
  std::uint64_t total = 0;
  for (const auto& u : sorted_updates) total += u.sample_count;
  std::vector<double> coefficients;
  coefficients.reserve(sorted_updates.size());
  for (const auto& u : sorted_updates) {
    coefficients.push_back(static_cast<double>(u.sample_count) / static_cast<double>(total));
  }
  return coefficients;
}

nn::ModelParams fedavg_aggregate(std::vector<RoundUpdate> updates) {
  if (updates.empty()) throw ProtocolError("aggregation needs at least one update");
  std::sort(updates.begin(), updates.end(),
            [](const RoundUpdate& a, const RoundUpdate& b) { return a.client_id < b.client_id; });
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const auto& u = updates[k];
    if (u.sample_count == 0) throw ProtocolError("client " + u.client_id + " reports 0 samples");
    if (u.round != updates.front().round) {
      throw ProtocolError("updates from different rounds cannot be aggregated");
    }
    if (!same_architecture(u.params, updates.front().params)) {
      throw ProtocolError("client " + u.client_id + " submitted parameters of a different shape");
    }
    if (k > 0 && u.client_id == updates[k - 1].client_id) {
      throw ProtocolError("duplicate update from client " + u.client_id);
    }
  }

  const std::vector<double> coefficients = aggregation_coefficients(updates);
  nn::ModelParams out = updates.front().params;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    const auto blend = [&](auto member) {
      auto& dst = out.layers[l].*member;
      for (std::size_t i = 0; i < dst.size(); ++i) {
        double lo = (updates.front().params.layers[l].*member)[i];
        double hi = lo;
        double acc = coefficients[0] * lo;
        for (std::size_t k = 1; k < updates.size(); ++k) {
          const double v = (updates[k].params.layers[l].*member)[i];
          acc += coefficients[k] * v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        // Rounding can push a convex combination an ulp outside the hull.
        dst[i] = std::clamp(acc, lo, hi);
      }
    };
    blend(&nn::DenseLayer::weights);
    blend(&nn::DenseLayer::bias);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Codec.

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw CodecError("truncated buffer: need " + std::to_string(n) + " bytes at offset " +
                     std::to_string(pos_) + ", have " + std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::string() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

nn::ModelParams ByteReader::params() {
  nn::ModelParams p;
  const std::uint32_t layer_count = u32();
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    nn::DenseLayer layer;
    layer.out = u32();
    layer.in = u32();
    const std::uint8_t tag = u8();
    if (tag > static_cast<std::uint8_t>(nn::Activation::kIdentity)) {
      throw CodecError("unknown activation tag " + std::to_string(tag));
    }
    layer.activation = static_cast<nn::Activation>(tag);
    const std::uint64_t count = static_cast<std::uint64_t>(layer.out) * layer.in + layer.out;
    if (count > remaining() / 8) throw CodecError("truncated buffer: layer data incomplete");
    layer.weights.resize(layer.out * layer.in);
    for (double& w : layer.weights) w = f64();
    layer.bias.resize(layer.out);
    for (double& b : layer.bias) b = f64();
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw CodecError(std::to_string(remaining()) + " trailing bytes after payload");
  }
}

void ByteWriter::u32(std::uint32_t v) {
  std::uint8_t b[4];
  std::memcpy(b, &v, 4);
  bytes_.insert(bytes_.end(), b, b + 4);
}

void ByteWriter::u64(std::uint64_t v) {
  std::uint8_t b[8];
  std::memcpy(b, &v, 8);
  bytes_.insert(bytes_.end(), b, b + 8);
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::string(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::params(const nn::ModelParams& p) {
  u32(static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& layer : p.layers) {
    u32(static_cast<std::uint32_t>(layer.out));
    u32(static_cast<std::uint32_t>(layer.in));
    u8(static_cast<std::uint8_t>(layer.activation));
    for (double w : layer.weights) f64(w);
    for (double b : layer.bias) f64(b);
  }
}

Bytes encode_params(const nn::ModelParams& params) {
  ByteWriter w;
  w.params(params);
  return w.take();
}

nn::ModelParams decode_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  nn::ModelParams p = r.params();
  r.expect_end();
  return p;
}

// ---------------------------------------------------------------------------
// Wire protocol.

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kRegister:
      return "Register";
    case MessageType::kModelBroadcast:
      return "ModelBroadcast";
    case MessageType::kUpdate:
      return "Update";
    case MessageType::kDone:
      return "Done";
    case MessageType::kError:
      return "Error";
  }
  return "Unknown";
}

Bytes frame(const WireMessage& message) {
  if (message.payload.size() > kMaxPayloadBytes) throw ProtocolError("payload too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(message.payload.size()));
  w.u8(static_cast<std::uint8_t>(message.type));
  Bytes out = w.take();
  out.insert(out.end(), message.payload.begin(), message.payload.end());
  return out;
}

std::optional<std::pair<WireMessage, std::size_t>> parse_frame(std::span<const std::uint8_t> buffer) {
  if (buffer.size() < kFrameHeaderSize) return std::nullopt;
  ByteReader r(buffer.first(kFrameHeaderSize));
  const std::uint32_t length = r.u32();
  const std::uint8_t type = r.u8();
  if (length > kMaxPayloadBytes) throw ProtocolError("frame length prefix exceeds the limit");
  if (type < static_cast<std::uint8_t>(MessageType::kRegister) ||
      type > static_cast<std::uint8_t>(MessageType::kError)) {
    throw ProtocolError("unknown message type " + std::to_string(type));
  }
  if (buffer.size() < kFrameHeaderSize + length) return std::nullopt;
  WireMessage m;
  m.type = static_cast<MessageType>(type);
  m.payload.assign(buffer.begin() + kFrameHeaderSize,
                   buffer.begin() + static_cast<std::ptrdiff_t>(kFrameHeaderSize + length));
  return std::make_pair(std::move(m), kFrameHeaderSize + length);
}

WireMessage make_register(const RegisterPayload& p) {
  ByteWriter w;
  w.string(p.client_id);
  w.u64(p.sample_count);
  w.u32(static_cast<std::uint32_t>(p.columns.size()));
  for (const auto& c : p.columns) w.string(c);
  return {MessageType::kRegister, w.take()};
}

WireMessage make_broadcast(const BroadcastPayload& p) {
  ByteWriter w;
  w.u32(p.round);
  w.params(p.params);
  return {MessageType::kModelBroadcast, w.take()};
}

WireMessage make_update(const UpdatePayload& p) {
  ByteWriter w;
  w.u32(p.round);
  w.u64(p.sample_count);
  w.f64(p.train_loss);
  w.params(p.params);
  return {MessageType::kUpdate, w.take()};
}

WireMessage make_done(const nn::ModelParams& final_model) {
  return {MessageType::kDone, encode_params(final_model)};
}

WireMessage make_error(std::string_view text) {
  return {MessageType::kError, Bytes(text.begin(), text.end())};
}

RegisterPayload parse_register(const WireMessage& m) {
  expect_type(m, MessageType::kRegister);
  ByteReader r(m.payload);
  RegisterPayload p;
  p.client_id = r.string();
  p.sample_count = r.u64();
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 4) throw CodecError("column count exceeds payload");
  for (std::uint32_t i = 0; i < n; ++i) p.columns.push_back(r.string());
  r.expect_end();
  return p;
}

BroadcastPayload parse_broadcast(const WireMessage& m) {
  expect_type(m, MessageType::kModelBroadcast);
  ByteReader r(m.payload);
  BroadcastPayload p;
  p.round = r.u32();
  p.params = r.params();
  r.expect_end();
  return p;
}

UpdatePayload parse_update(const WireMessage& m) {
  expect_type(m, MessageType::kUpdate);
  ByteReader r(m.payload);
  UpdatePayload p;
  p.round = r.u32();
  p.sample_count = r.u64();
  p.train_loss = r.f64();
  p.params = r.params();
  r.expect_end();
  return p;
}

nn::ModelParams parse_done(const WireMessage& m) {
  expect_type(m, MessageType::kDone);
  return decode_params(m.payload);
}

std::string parse_error(const WireMessage& m) {
  expect_type(m, MessageType::kError);
  return std::string(m.payload.begin(), m.payload.end());
}

// ---------------------------------------------------------------------------
// Participants.

FedClient::FedClient(ClientData data, const FedConfig& cfg) : data_(std::move(data)), cfg_(cfg) {
  if (data_.x.rows() != data_.labels.size()) {
    throw ShapeError("client " + data_.client_id + " features and labels differ in length");
  }
  if (data_.x.rows() == 0) throw DataError("client " + data_.client_id + " has no training rows");
  if (data_.columns.size() != data_.x.cols()) {
    throw ShapeError("client " + data_.client_id + " column names do not match its matrix");
  }
}

RegisterPayload FedClient::registration() const {
  return {data_.client_id, data_.x.rows(), data_.columns};
}

UpdatePayload FedClient::train_round(const BroadcastPayload& broadcast) {
  if (broadcast.params.input_dim() != data_.x.cols()) {
    throw ProtocolError("client " + data_.client_id + ": broadcast model expects " +
                        std::to_string(broadcast.params.input_dim()) + " inputs, data has " +
                        std::to_string(data_.x.cols()));
  }
  if (!trainer_) {
    trainer_.emplace(broadcast.params, client_train_config(cfg_, data_.client_id));
  } else {
    trainer_->set_params(broadcast.params);
  }
  UpdatePayload update;
  update.round = broadcast.round;
  update.sample_count = data_.x.rows();
  for (std::size_t e = 0; e < cfg_.local_epochs; ++e) {
    update.train_loss = trainer_->run_epoch(data_.x, data_.labels, data_.weights);
  }
  update.params = trainer_->params();
  return update;
}

FedServer::FedServer(nn::ModelParams initial, FedConfig cfg,
                     std::optional<std::vector<std::string>> expected_columns)
    : model_(std::move(initial)), cfg_(std::move(cfg)), columns_(std::move(expected_columns)) {
  cfg_.validate();
  model_.validate();
  if (columns_ && columns_->size() != model_.input_dim()) {
    throw ConfigError("global layout width does not match the global model input");
  }
}

void FedServer::register_client(const RegisterPayload& registration) {
  if (ready()) {
    throw ProtocolError("unexpected registration from " + registration.client_id +
                        ": all clients already registered");
  }
  if (registration.client_id.empty()) throw ProtocolError("registration with an empty client id");
  if (std::find(registered_.begin(), registered_.end(), registration.client_id) !=
      registered_.end()) {
    throw ProtocolError("client " + registration.client_id + " registered twice");
  }
  if (registration.sample_count == 0) {
    throw ProtocolError("client " + registration.client_id + " registered with 0 samples");
  }
  if (registration.columns.size() != model_.input_dim()) {
    throw ProtocolError("client " + registration.client_id +
                        " column layout mismatch at registration: " +
                        std::to_string(registration.columns.size()) + " columns, model expects " +
                        std::to_string(model_.input_dim()));
  }
  if (!columns_) {
    columns_ = registration.columns;
  } else if (*columns_ != registration.columns) {
    throw ProtocolError("client " + registration.client_id +
                        " column layout mismatch at registration");
  }
  registered_.push_back(registration.client_id);
  sample_counts_.push_back(registration.sample_count);
}

BroadcastPayload FedServer::broadcast() const {
  if (!ready()) throw ProtocolError("broadcast before every client registered");
  if (done()) throw ProtocolError("broadcast after the final round");
  return {round_, model_};
}

void FedServer::submit(const std::string& client_id, const UpdatePayload& update) {
  const auto it = std::find(registered_.begin(), registered_.end(), client_id);
  if (it == registered_.end()) throw ProtocolError("update from unregistered client " + client_id);
  if (update.round != round_) {
    throw ProtocolError("client " + client_id + " sent an update for round " +
                        std::to_string(update.round) + " during round " + std::to_string(round_));
  }
  for (const auto& p : pending_) {
    if (p.client_id == client_id) {
      throw ProtocolError("client " + client_id + " sent two updates in round " +
                          std::to_string(round_));
    }
  }
  const std::uint64_t registered_count =
      sample_counts_[static_cast<std::size_t>(it - registered_.begin())];
  if (update.sample_count != registered_count) {
    throw ProtocolError("client " + client_id + " changed its sample count");
  }
  if (!same_architecture(update.params, model_)) {
    throw ProtocolError("client " + client_id + " sent parameters of a different shape in round " +
                        std::to_string(round_));
  }
  pending_.push_back({client_id, update.round, update.params, update.sample_count,
                      update.train_loss});
}

void FedServer::finish_round() {
  if (!round_complete()) throw ProtocolError("round finished before every update arrived");
  std::sort(pending_.begin(), pending_.end(),
            [](const RoundUpdate& a, const RoundUpdate& b) { return a.client_id < b.client_id; });
  for (const auto& u : pending_) history_.push_back({round_, u.client_id, u.train_loss});
  model_ = fedavg_aggregate(std::move(pending_));
  pending_.clear();
  ++round_;
}

std::string_view to_string(Transport transport) {
  return transport == Transport::kInProc ? "inproc" : "tcp";
}

Transport transport_from_string(std::string_view name) {
  if (name == "inproc") return Transport::kInProc;
  if (name == "tcp") return Transport::kTcp;
  throw ConfigError("unknown transport '" + std::string(name) + "'");
}

}  // namespace lf2l::fed
