#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>

#include "flamesh/net_backend.hpp"

namespace flamesh {

/// Inbox for real threads: a mutex-guarded deque with a condition variable.
class ThreadInbox final : public Inbox {
 public:
  void push(Envelope env) override;
  void close() override;
  Envelope pop(Timeout timeout) override;
  std::size_t size() const override;
  bool closed() const override;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  bool closed_ = false;
};

/// IPv4 TCP. Each listener runs one accept thread that serves connections
/// one at a time; each connection carries a single frame.
class TcpBackend final : public NetBackend {
 public:
  struct Options {
    Duration connect_timeout = std::chrono::seconds(5);
    Duration io_timeout = std::chrono::seconds(5);
  };

  TcpBackend() = default;
  explicit TcpBackend(Options opts) : opts_(opts) {}

  std::unique_ptr<ListenerHandle> listen(const Endpoint& ep, ConnectionHandler handler) override;
  std::unique_ptr<ByteSink> connect(const Endpoint& ep) override;
  std::shared_ptr<Inbox> make_inbox() override;
  void sleep_for(Duration d) override;

 private:
  Options opts_;
};

}  // namespace flamesh
