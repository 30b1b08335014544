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

#ifndef DPFUSION_REMOTE_BACKEND_H_
#define DPFUSION_REMOTE_BACKEND_H_

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dpfusion/backend.h"

namespace dpfusion {

// Environment variable consulted for the auth token when the config has none.
inline constexpr char kAuthTokenEnv[] = "DPFUSION_AUTH_TOKEN";

struct RemoteBackendConfig {
  std::string host = "127.0.0.1";
  int port = 0;
  int timeout_ms = 30000;
  int retries = 2;
  std::size_t pool_size = 4;
  std::string auth_token;
  // Ask the server for log-probabilities instead of probabilities.
  bool logprobs = false;
};

// Parses "HOST:PORT" into config.host and config.port.
RemoteBackendConfig ParseEndpoint(const std::string& address,
                                  RemoteBackendConfig base = {});

// Client for the wire protocol. Requests are spread over a pool of
// persistent connections; a transport failure closes the connection and the
// request is retried on a fresh one up to `retries` times.
class RemoteBackend final : public DistributionProvider {
 public:
  // Connects and issues an "info" request. Throws kTransport when the server
  // is unreachable and kMalformedResponse on a protocol mismatch.
  explicit RemoteBackend(RemoteBackendConfig config);
  ~RemoteBackend() override;

  RemoteBackend(const RemoteBackend&) = delete;
  RemoteBackend& operator=(const RemoteBackend&) = delete;

  std::size_t vocab_size() const override { return vocab_size_; }
  int eos_token() const override { return eos_token_; }
  BackendCapabilities capabilities() const override { return capabilities_; }
  const std::string& model_name() const { return model_name_; }

  Dist NextDistribution(std::string_view context,
                        double temperature) const override;
  std::vector<Dist> NextDistributionBatch(
      std::span<const std::string> contexts,
      double temperature) const override;
  LogitVector NextLogits(std::string_view context) const override;
  std::vector<double> ScoreContinuation(
      std::string_view context, std::string_view continuation) const override;
  std::string TokenText(int token) const override;

 private:
  class Connection;

  std::string Call(const std::string& payload) const;
  std::unique_ptr<Connection> Acquire() const;
  void Release(std::unique_ptr<Connection> connection) const;
  std::vector<Dist> RequestDists(const char* op,
                                 std::span<const std::string> contexts,
                                 double temperature) const;

  RemoteBackendConfig config_;
  std::size_t vocab_size_ = 0;
  int eos_token_ = 0;
  BackendCapabilities capabilities_;
  std::string model_name_;

  mutable std::mutex pool_mutex_;
  mutable std::condition_variable pool_cv_;
  mutable std::vector<std::unique_ptr<Connection>> idle_;
  mutable std::size_t open_ = 0;

  mutable std::mutex pieces_mutex_;
  mutable std::map<int, std::string> pieces_;
};

// Serves a provider over the wire protocol on a TCP port, one thread per
// connection. Port 0 picks an ephemeral port.
class ProtocolServer {
 public:
  ProtocolServer(const DistributionProvider& provider, std::string host,
                 int port, std::string required_auth = {},
                 std::string model_name = "mock");
  ~ProtocolServer();

  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  int port() const { return port_; }
  void Stop();
  // Blocks until Stop() is called from another thread.
  void Wait();

 private:
  void AcceptLoop();
  void Serve(int fd);

  const DistributionProvider& provider_;
  std::string required_auth_;
  std::string model_name_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  std::thread acceptor_;
  std::mutex clients_mutex_;
  std::vector<std::thread> clients_;
  std::vector<int> client_fds_;
};

}  // namespace dpfusion

#endif  // DPFUSION_REMOTE_BACKEND_H_
