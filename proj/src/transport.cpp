// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Federated session drivers: the in-process loop and the TCP client/server.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <exception>
#include <memory>
#include <thread>

#include "lf2l/error.hpp"
#include "lf2l/fed.hpp"

namespace lf2l::fed {
namespace {

std::string errno_text() { return std::strerror(errno); }

class Connection {
 public:
  explicit Connection(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~Connection() {
    if (fd_ >= 0) ::close(fd_);
  }
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void send(const WireMessage& message) {
    const Bytes bytes = frame(message);
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ProtocolError("send failed: " + errno_text());
      sent += static_cast<std::size_t>(n);
    }
  }

  // nullopt when the peer closed the connection cleanly between frames.
  std::optional<WireMessage> receive() {
    std::uint8_t header[kFrameHeaderSize];
    if (!read_exact(header, sizeof(header), /*eof_ok=*/true)) return std::nullopt;
    ByteReader r(std::span<const std::uint8_t>(header, sizeof(header)));
    const std::uint32_t length = r.u32();
    if (length > kMaxPayloadBytes) throw ProtocolError("frame length prefix exceeds the limit");
    Bytes buffer(header, header + sizeof(header));
    buffer.resize(kFrameHeaderSize + length);
    if (length > 0) read_exact(buffer.data() + kFrameHeaderSize, length, /*eof_ok=*/false);
    auto parsed = parse_frame(buffer);
    return std::move(parsed->first);
  }

  void try_send(const WireMessage& message) noexcept {
    try {
      send(message);
    } catch (...) {
    }
  }

 private:
  bool read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) throw ProtocolError("receive failed: " + errno_text());
      if (r == 0) {
        if (eof_ok && got == 0) return false;
        throw ProtocolError("connection closed mid-frame");
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  int fd_ = -1;
};

int connect_once(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string port_text = std::to_string(port);
  if (::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &result) != 0 || result == nullptr) {
    throw ProtocolError("cannot resolve " + host);
  }
  int fd = ::socket(result->ai_family, result->ai_socktype, result->ai_protocol);
  if (fd >= 0 && ::connect(fd, result->ai_addr, result->ai_addrlen) != 0) {
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  return fd;
}

}  // namespace

TcpListener::TcpListener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw ProtocolError("socket failed: " + errno_text());
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw ProtocolError("invalid listen address " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string why = errno_text();
    ::close(fd_);
    throw ProtocolError("bind to " + host + ":" + std::to_string(port) + " failed: " + why);
  }
  if (::listen(fd_, 16) != 0) {
    const std::string why = errno_text();
    ::close(fd_);
    throw ProtocolError("listen failed: " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

int TcpListener::accept_fd(int timeout_ms) {
  pollfd pfd{fd_, POLLIN, 0};
  int ready = 0;
  do {
    ready = ::poll(&pfd, 1, timeout_ms);
  } while (ready < 0 && errno == EINTR);
  if (ready == 0) throw ProtocolError("timed out waiting for clients to connect");
  if (ready < 0) throw ProtocolError("poll failed: " + errno_text());
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw ProtocolError("accept failed: " + errno_text());
  return fd;
}

FedResult serve_tcp(FedServer& server, TcpListener& listener, int accept_timeout_ms) {
  std::vector<std::unique_ptr<Connection>> connections;
  std::vector<std::string> ids;
  const auto abort_all = [&](const std::string& text) {
    for (auto& c : connections) c->try_send(make_error(text));
  };

  try {
    while (!server.ready()) {
      connections.push_back(std::make_unique<Connection>(listener.accept_fd(accept_timeout_ms)));
      Connection& conn = *connections.back();
      std::optional<WireMessage> message = conn.receive();
      if (!message) throw ProtocolError("client disconnected before registering");
      const RegisterPayload registration = parse_register(*message);
      server.register_client(registration);
      ids.push_back(registration.client_id);
    }

    while (!server.done()) {
      const std::uint32_t round = server.round();
      const WireMessage broadcast = make_broadcast(server.broadcast());
      for (std::size_t i = 0; i < connections.size(); ++i) {
        try {
          connections[i]->send(broadcast);
        } catch (const ProtocolError& e) {
          throw ProtocolError("client " + ids[i] + " disconnected in round " +
                              std::to_string(round) + ": " + e.what());
        }
      }

      // Updates arrive concurrently; they are applied in client-id order.
      std::vector<std::optional<WireMessage>> replies(connections.size());
      std::vector<std::exception_ptr> errors(connections.size());
      std::vector<std::thread> readers;
      for (std::size_t i = 0; i < connections.size(); ++i) {
        readers.emplace_back([&, i] {
          try {
            replies[i] = connections[i]->receive();
          } catch (...) {
            errors[i] = std::current_exception();
          }
        });
      }
      for (auto& t : readers) t.join();

      for (std::size_t i = 0; i < connections.size(); ++i) {
        if (errors[i] || !replies[i]) {
          throw ProtocolError("client " + ids[i] + " disconnected in round " +
                              std::to_string(round));
        }
        if (replies[i]->type == MessageType::kError) {
          throw ProtocolError("client " + ids[i] + " failed in round " + std::to_string(round) +
                              ": " + parse_error(*replies[i]));
        }
        server.submit(ids[i], parse_update(*replies[i]));
      }
      server.finish_round();
    }

    const WireMessage done = make_done(server.model());
    for (auto& c : connections) c->try_send(done);
  } catch (const std::exception& e) {
    abort_all(e.what());
    throw;
  }
  return {server.model(), server.history()};
}

nn::ModelParams join_tcp(FedClient& client, const std::string& host, std::uint16_t port,
                         int connect_timeout_ms) {
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(connect_timeout_ms);
  int fd = -1;
  while ((fd = connect_once(host, port)) < 0) {
    if (std::chrono::steady_clock::now() >= deadline) {
      throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  Connection conn(fd);
  conn.send(make_register(client.registration()));
  while (true) {
    std::optional<WireMessage> message = conn.receive();
    if (!message) throw ProtocolError("client " + client.id() + ": server closed the connection");
    switch (message->type) {
      case MessageType::kModelBroadcast: {
        UpdatePayload update;
        try {
          update = client.train_round(parse_broadcast(*message));
        } catch (const std::exception& e) {
          conn.try_send(make_error(e.what()));
          throw;
        }
        conn.send(make_update(update));
        break;
      }
      case MessageType::kDone:
        return parse_done(*message);
      case MessageType::kError:
        throw ProtocolError("client " + client.id() + " rejected by server: " +
                            parse_error(*message));
      default:
        throw ProtocolError("client " + client.id() + " received unexpected " +
                            std::string(to_string(message->type)) + " message");
    }
  }
}

FedResult run_federated(std::vector<ClientData> clients, nn::ModelParams initial,
                        const FedConfig& cfg, Transport transport) {
  cfg.validate();
  if (clients.empty()) throw ConfigError("federated training needs at least one client");
  if (clients.size() != cfg.expected_clients) {
    throw ConfigError("expected_clients is " + std::to_string(cfg.expected_clients) + " but " +
                      std::to_string(clients.size()) + " clients were supplied");
  }
  std::vector<FedClient> participants;
  participants.reserve(clients.size());
  for (auto& c : clients) participants.emplace_back(std::move(c), cfg);

  FedServer server(std::move(initial), cfg);
  if (transport == Transport::kInProc) {
    for (const auto& p : participants) server.register_client(p.registration());
    while (!server.done()) {
      const BroadcastPayload broadcast = server.broadcast();
      for (auto& p : participants) server.submit(p.id(), p.train_round(broadcast));
      server.finish_round();
    }
    return {server.model(), server.history()};
  }

  TcpListener listener("127.0.0.1", 0);
  std::vector<std::exception_ptr> client_errors(participants.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    threads.emplace_back([&, i] {
      try {
        join_tcp(participants[i], "127.0.0.1", listener.port());
      } catch (...) {
        client_errors[i] = std::current_exception();
      }
    });
  }
  FedResult result;
  std::exception_ptr server_error;
  try {
    result = serve_tcp(server, listener, 60000);
  } catch (...) {
    server_error = std::current_exception();
  }
  for (auto& t : threads) t.join();
  if (server_error) std::rethrow_exception(server_error);
  for (const auto& e : client_errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace lf2l::fed
