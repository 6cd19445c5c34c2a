#pragma once

#include <memory>
#include <span>
#include <vector>

#include "flamesh/error.hpp"
#include "flamesh/net_backend.hpp"
#include "flamesh/wire.hpp"

namespace flamesh {

/// Connect retry schedule: attempt k (0-based) that fails sleeps
/// min(initial * factor^k, cap) before the next one.
struct RetryPolicy {
  int attempts = 20;
  Duration initial_delay = std::chrono::milliseconds(100);
  double factor = 1.5;
  Duration max_delay = std::chrono::seconds(5);

  Duration delay_after(int attempt) const;

  /// Total time spent sleeping if every attempt fails.
  Duration budget() const;
};

inline constexpr Duration kDefaultRecvTimeout = std::chrono::seconds(30);

/// Thrown by rcv_msgs; carries what did arrive.
class RecvTimeout : public Error {
 public:
  RecvTimeout(std::size_t wanted, std::vector<Envelope> partial);

  const std::vector<Envelope>& partial() const noexcept { return partial_; }

 private:
  std::vector<Envelope> partial_;
};

class PartialBroadcast : public Error {
 public:
  explicit PartialBroadcast(std::vector<Endpoint> failed);

  const std::vector<Endpoint>& failed() const noexcept { return failed_; }

 private:
  std::vector<Endpoint> failed_;
};

/// A running listener and the inbox it feeds.
class Server {
 public:
  Server(std::shared_ptr<Inbox> inbox, std::unique_ptr<ListenerHandle> listener);
  Server(Server&&) noexcept = default;
  Server& operator=(Server&&) noexcept = default;
  ~Server();

  Inbox& inbox() { return *inbox_; }
  const std::shared_ptr<Inbox>& inbox_ptr() const { return inbox_; }

  /// Stops the listener, then closes the inbox. Idempotent.
  void shutdown();

 private:
  std::shared_ptr<Inbox> inbox_;
  std::unique_ptr<ListenerHandle> listener_;
};

/// Binds self and starts reading one frame per inbound connection into a
/// fresh inbox. Torn or undecodable frames are logged and dropped.
Server serve(const Endpoint& self, NetBackend& backend);

/// Reads one frame from src and pushes it; exposed for backends and tests.
void receive_frame(ByteSource& src, Inbox& inbox);

/// One connection, one frame. Throws Error(Unreachable) after the retry
/// policy is exhausted.
void send_msg(const Endpoint& dest, const Envelope& env, NetBackend& backend,
              const RetryPolicy& retry = {});

/// send_msg to every destination; all are attempted even if one fails.
/// Throws PartialBroadcast listing the failures.
void broadcast_msg(std::span<const Endpoint> dests, const Envelope& env, NetBackend& backend,
                   const RetryPolicy& retry = {});

Envelope rcv_msg(Inbox& inbox, Timeout timeout = kDefaultRecvTimeout);

/// First count envelopes in arrival order. timeout bounds each wait.
std::vector<Envelope> rcv_msgs(Inbox& inbox, std::size_t count, Timeout timeout = kDefaultRecvTimeout);

}  // namespace flamesh
