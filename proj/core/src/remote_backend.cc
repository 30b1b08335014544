// Copyright 2026 The DP-Fusion Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpfusion/remote_backend.h"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <cstring>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"
#include "dpfusion/wire_protocol.h"

namespace dpfusion {
namespace {

using nlohmann::json;

ErrorCode CodeFromName(const std::string& name) {
  constexpr std::array kCodes = {
      ErrorCode::kInvalidInput,      ErrorCode::kDivergenceUndefined,
      ErrorCode::kMalformedDocument, ErrorCode::kDegenerateDocument,
      ErrorCode::kContextTooLong,    ErrorCode::kTransport,
      ErrorCode::kMalformedResponse, ErrorCode::kUnsupported,
      ErrorCode::kScoring};
  for (ErrorCode code : kCodes) {
    if (ErrorCodeName(code) == name) return code;
  }
  return ErrorCode::kMalformedResponse;
}

void SetTimeouts(int fd, int timeout_ms) {
  timeval tv{};
  tv.tv_sec = timeout_ms / 1000;
  tv.tv_usec = (timeout_ms % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

json ParseResponse(const std::string& payload) {
  json response;
  try {
    response = json::parse(payload);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  if (response.value("version", -1) != wire::kProtocolVersion) {
    throw Error(ErrorCode::kMalformedResponse,
                "response lacks protocol version " +
                    std::to_string(wire::kProtocolVersion));
  }
  if (response.contains("error")) {
    const auto& error = response["error"];
    throw Error(CodeFromName(error.value("code", std::string())),
                error.value("message", std::string("server error")));
  }
  return response;
}

template <typename T>
T Field(const json& response, const char* key) {
  try {
    return response.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse,
                std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

class RemoteBackend::Connection {
 public:
  Connection(const std::string& host, int port, int timeout_ms) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* results = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &results) != 0) {
      throw Error(ErrorCode::kTransport, "cannot resolve " + host);
    }
    for (addrinfo* ai = results; ai != nullptr; ai = ai->ai_next) {
      const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      SetTimeouts(fd, timeout_ms);
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(results);
    if (fd_ < 0) {
      throw Error(ErrorCode::kTransport,
                  "cannot connect to " + host + ":" + service + ": " +
                      std::strerror(errno));
    }
  }
  ~Connection() {
    if (fd_ >= 0) ::close(fd_);
  }
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  std::string RoundTrip(const std::string& payload) {
    wire::WriteFrame(fd_, payload);
    return wire::ReadFrame(fd_);
  }

 private:
  int fd_ = -1;
};

RemoteBackendConfig ParseEndpoint(const std::string& address,
                                  RemoteBackendConfig base) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "endpoint must be HOST:PORT, got '" + address + "'");
  }
  base.host = colon == 0 ? "127.0.0.1" : address.substr(0, colon);
  std::size_t used = 0;
  try {
    base.port = std::stoi(address.substr(colon + 1), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != address.size() - colon - 1 || base.port < 0 ||
      base.port > 65535) {
    throw Error(ErrorCode::kInvalidInput, "bad port in '" + address + "'");
  }
  return base;
}

RemoteBackend::RemoteBackend(RemoteBackendConfig config)
    : config_(std::move(config)) {
  if (config_.timeout_ms <= 0) {
    throw Error(ErrorCode::kInvalidInput, "timeout must be positive");
  }
  if (config_.pool_size == 0) config_.pool_size = 1;
  if (config_.auth_token.empty()) {
    if (const char* env = std::getenv(kAuthTokenEnv)) config_.auth_token = env;
  }
  const json info =
      ParseResponse(Call(json{{"version", wire::kProtocolVersion},
                              {"op", "info"},
                              {"auth", config_.auth_token}}
                             .dump()));
  vocab_size_ = Field<std::size_t>(info, "vocab_size");
  eos_token_ = Field<int>(info, "eos_token");
  model_name_ = info.value("model", std::string());
  const json caps = info.value("capabilities", json::object());
  capabilities_.next_dist = caps.value("next_dist", true);
  capabilities_.teacher_force_score = caps.value("teacher_force_score", false);
  capabilities_.batched = caps.value("batched", false);
  capabilities_.logits = caps.value("logits", false);
}

RemoteBackend::~RemoteBackend() = default;

std::unique_ptr<RemoteBackend::Connection> RemoteBackend::Acquire() const {
  std::unique_lock lock(pool_mutex_);
  pool_cv_.wait(lock,
                [&] { return !idle_.empty() || open_ < config_.pool_size; });
  if (!idle_.empty()) {
    auto connection = std::move(idle_.back());
    idle_.pop_back();
    return connection;
  }
  ++open_;
  lock.unlock();
  try {
    return std::make_unique<Connection>(config_.host, config_.port,
                                        config_.timeout_ms);
  } catch (...) {
    lock.lock();
    --open_;
    pool_cv_.notify_one();
    throw;
  }
}

void RemoteBackend::Release(std::unique_ptr<Connection> connection) const {
  std::lock_guard lock(pool_mutex_);
  if (connection) {
    idle_.push_back(std::move(connection));
  } else {
    --open_;
  }
  pool_cv_.notify_one();
}

std::string RemoteBackend::Call(const std::string& payload) const {
  for (int attempt = 0;; ++attempt) {
    std::unique_ptr<Connection> connection;
    try {
      connection = Acquire();
      std::string reply = connection->RoundTrip(payload);
      Release(std::move(connection));
      return reply;
    } catch (const Error& e) {
      if (connection) Release(nullptr);
      if (e.code() != ErrorCode::kTransport || attempt >= config_.retries) {
        throw;
      }
    }
  }
}

std::vector<Dist> RemoteBackend::RequestDists(
    const char* op, std::span<const std::string> contexts,
    double temperature) const {
  const json request = {{"version", wire::kProtocolVersion},
                        {"op", op},
                        {"contexts", contexts},
                        {"temperature", temperature},
                        {"logprobs", config_.logprobs},
                        {"auth", config_.auth_token}};
  const json response = ParseResponse(Call(request.dump()));
  if (Field<std::size_t>(response, "vocab_size") != vocab_size_) {
    throw Error(ErrorCode::kMalformedResponse, "vocabulary size changed");
  }
  const bool as_logprobs = response.value("logprobs", false);
  const auto rows = Field<std::vector<std::vector<double>>>(response, "dists");
  if (rows.size() != contexts.size()) {
    throw Error(ErrorCode::kMalformedResponse,
                "expected " + std::to_string(contexts.size()) +
                    " distributions, got " + std::to_string(rows.size()));
  }
  std::vector<Dist> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.size() != vocab_size_) {
      throw Error(ErrorCode::kMalformedResponse,
                  "distribution has wrong length");
    }
    try {
      out.push_back(wire::DecodeDist(row, as_logprobs));
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedResponse, e.what());
    }
  }
  return out;
}

Dist RemoteBackend::NextDistribution(std::string_view context,
                                     double temperature) const {
  const std::string contexts[] = {std::string(context)};
  return RequestDists("next_dist", contexts, temperature).front();
}

std::vector<Dist> RemoteBackend::NextDistributionBatch(
    std::span<const std::string> contexts, double temperature) const {
  if (contexts.empty()) throw Error(ErrorCode::kInvalidInput, "empty batch");
  if (!capabilities_.batched) {
    return DistributionProvider::NextDistributionBatch(contexts, temperature);
  }
  return RequestDists("batch_next_dist", contexts, temperature);
}

LogitVector RemoteBackend::NextLogits(std::string_view context) const {
  if (!capabilities_.logits) return DistributionProvider::NextLogits(context);
  const json request = {{"version", wire::kProtocolVersion},
                        {"op", "next_logits"},
                        {"contexts", {std::string(context)}},
                        {"auth", config_.auth_token}};
  const json response = ParseResponse(Call(request.dump()));
  auto rows = Field<std::vector<std::vector<double>>>(response, "logits");
  if (rows.size() != 1 || rows.front().size() != vocab_size_) {
    throw Error(ErrorCode::kMalformedResponse, "bad logits shape");
  }
  return LogitVector(std::move(rows.front()));
}

std::vector<double> RemoteBackend::ScoreContinuation(
    std::string_view context, std::string_view continuation) const {
  if (!capabilities_.teacher_force_score) {
    return DistributionProvider::ScoreContinuation(context, continuation);
  }
  const json request = {{"version", wire::kProtocolVersion},
                        {"op", "score"},
                        {"contexts", {std::string(context)}},
                        {"continuation", std::string(continuation)},
                        {"auth", config_.auth_token}};
  return Field<std::vector<double>>(ParseResponse(Call(request.dump())),
                                    "logprobs");
}

std::string RemoteBackend::TokenText(int token) const {
  {
    std::lock_guard lock(pieces_mutex_);
    if (const auto it = pieces_.find(token); it != pieces_.end()) {
      return it->second;
    }
  }
  const json request = {{"version", wire::kProtocolVersion},
                        {"op", "detokenize"},
                        {"tokens", {token}},
                        {"auth", config_.auth_token}};
  const auto pieces = Field<std::vector<std::string>>(
      ParseResponse(Call(request.dump())), "pieces");
  if (pieces.size() != 1) {
    throw Error(ErrorCode::kMalformedResponse, "bad detokenize reply");
  }
  std::lock_guard lock(pieces_mutex_);
  pieces_[token] = pieces.front();
  return pieces.front();
}

ProtocolServer::ProtocolServer(const DistributionProvider& provider,
                               std::string host, int port,
                               std::string required_auth,
                               std::string model_name)
    : provider_(provider),
      required_auth_(std::move(required_auth)),
      model_name_(std::move(model_name)) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* results = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(),
                    &hints, &results) != 0) {
    throw Error(ErrorCode::kTransport, "cannot resolve " + host);
  }
  for (addrinfo* ai = results; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 &&
        ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(results);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::kTransport,
                "cannot listen on " + host + ":" + service);
  }
  sockaddr_storage bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = bound.ss_family == AF_INET6
              ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
              : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

ProtocolServer::~ProtocolServer() { Stop(); }

void ProtocolServer::Stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> clients;
  {
    std::lock_guard lock(clients_mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    clients.swap(clients_);
  }
  for (auto& t : clients) t.join();
  {
    std::lock_guard lock(stop_mutex_);
  }
  stop_cv_.notify_all();
}

void ProtocolServer::Wait() {
  std::unique_lock lock(stop_mutex_);
  stop_cv_.wait(lock, [&] { return stopping_.load(); });
}

void ProtocolServer::AcceptLoop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    std::lock_guard lock(clients_mutex_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    client_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { Serve(fd); });
  }
}

void ProtocolServer::Serve(int fd) {
  try {
    while (!stopping_) {
      const std::string request = wire::ReadFrame(fd);
      wire::WriteFrame(fd, wire::HandleRequest(provider_, request,
                                               required_auth_, model_name_));
    }
  } catch (const Error&) {
    // Peer went away; nothing to report.
  }
  std::lock_guard lock(clients_mutex_);
  std::erase(client_fds_, fd);
  ::close(fd);
}

}  // namespace dpfusion
