#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "flamesh/wire.hpp"

namespace flamesh {

using Duration = std::chrono::microseconds;

/// No value means "wait forever".
using Timeout = std::optional<Duration>;

/// Inbound half of one connection.
class ByteSource {
 public:
  virtual ~ByteSource() = default;

  /// Reads up to out.size() bytes. Returns 0 on end of stream or error.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;

  /// Returns false if the stream ended before out was filled.
  bool read_exact(std::span<std::uint8_t> out);
};

/// Outbound half of one connection.
class ByteSink {
 public:
  virtual ~ByteSink() = default;

  virtual bool write(std::span<const std::uint8_t> bytes) = 0;

  /// Flushes and closes. Returns false if the stream broke.
  virtual bool close() = 0;
};

class ListenerHandle {
 public:
  virtual ~ListenerHandle() = default;

  /// Stops accepting and releases the address. Idempotent.
  virtual void stop() = 0;
};

/// Multi-producer / single-consumer queue of received envelopes.
class Inbox {
 public:
  virtual ~Inbox() = default;

  virtual void push(Envelope env) = 0;

  /// Wakes the consumer; later pops on an empty inbox throw Closed.
  virtual void close() = 0;

  /// Oldest envelope; blocks while empty. Throws Error(Timeout) or
  /// Error(Closed).
  virtual Envelope pop(Timeout timeout) = 0;

  virtual std::size_t size() const = 0;
  virtual bool closed() const = 0;
};

/// Where bytes actually travel: real sockets or the in-process simulator.
/// Also owns the notion of time, so retries and timeouts run on virtual
/// time under simulation.
class NetBackend {
 public:
  using ConnectionHandler = std::function<void(ByteSource&)>;

  virtual ~NetBackend() = default;

  /// Binds ep; handler runs once per inbound connection.
  /// Throws Error(BindFailure) or Error(DuplicateBind).
  virtual std::unique_ptr<ListenerHandle> listen(const Endpoint& ep, ConnectionHandler handler) = 0;

  /// Opens an outbound stream, or nullptr if the peer cannot be reached
  /// right now (the caller decides whether to retry).
  virtual std::unique_ptr<ByteSink> connect(const Endpoint& ep) = 0;

  virtual std::shared_ptr<Inbox> make_inbox() = 0;

  virtual void sleep_for(Duration d) = 0;
};

}  // namespace flamesh
