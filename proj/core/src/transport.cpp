#include "flamesh/transport.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace flamesh {

Duration RetryPolicy::delay_after(int attempt) const {
  double us = static_cast<double>(initial_delay.count()) * std::pow(factor, attempt);
  double cap = static_cast<double>(max_delay.count());
  return Duration(static_cast<Duration::rep>(std::min(us, cap)));
}

Duration RetryPolicy::budget() const {
  Duration total{0};
  for (int k = 0; k + 1 < attempts; ++k) total += delay_after(k);
  return total;
}

RecvTimeout::RecvTimeout(std::size_t wanted, std::vector<Envelope> partial)
    : Error(ErrorCode::kTimeout, "received " + std::to_string(partial.size()) + " of " +
                                     std::to_string(wanted) + " messages"),
      partial_(std::move(partial)) {}

namespace {
std::string join(const std::vector<Endpoint>& eps) {
  std::string s;
  for (const auto& ep : eps) {
    if (!s.empty()) s += ", ";
    s += to_string(ep);
  }
  return s;
}
}  // namespace

PartialBroadcast::PartialBroadcast(std::vector<Endpoint> failed)
    : Error(ErrorCode::kPartialBroadcast, "unreachable: " + join(failed)), failed_(std::move(failed)) {}

Server::Server(std::shared_ptr<Inbox> inbox, std::unique_ptr<ListenerHandle> listener)
    : inbox_(std::move(inbox)), listener_(std::move(listener)) {}

Server::~Server() { shutdown(); }

void Server::shutdown() {
  if (listener_) {
    listener_->stop();
    listener_.reset();
  }
  if (inbox_) inbox_->close();
}

void receive_frame(ByteSource& src, Inbox& inbox) {
  std::uint8_t prefix[kFramePrefix];
  if (!src.read_exact(prefix)) {
    std::cerr << "flamesh: warning: connection closed before a length prefix arrived\n";
    return;
  }
  std::size_t total = 0;
  try {
    total = frame_size(prefix);
  } catch (const Error& e) {
    std::cerr << "flamesh: warning: " << e.what() << '\n';
    return;
  }
  std::vector<std::uint8_t> frame(total);
  std::copy(std::begin(prefix), std::end(prefix), frame.begin());
  if (!src.read_exact(std::span(frame).subspan(kFramePrefix))) {
    std::cerr << "flamesh: warning: torn frame dropped\n";
    return;
  }
  try {
    inbox.push(decode(frame));
  } catch (const Error& e) {
    std::cerr << "flamesh: warning: undecodable frame dropped: " << e.what() << '\n';
  }
}

Server serve(const Endpoint& self, NetBackend& backend) {
  auto inbox = backend.make_inbox();
  std::weak_ptr<Inbox> weak = inbox;
  auto listener = backend.listen(self, [weak](ByteSource& src) {
    if (auto in = weak.lock()) receive_frame(src, *in);
  });
  return Server(std::move(inbox), std::move(listener));
}

void send_msg(const Endpoint& dest, const Envelope& env, NetBackend& backend, const RetryPolicy& retry) {
  const auto frame = encode(env);
  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (auto sink = backend.connect(dest)) {
      bool ok = sink->write(frame);
      ok = sink->close() && ok;
      if (ok) return;
    }
    if (attempt + 1 < attempts) backend.sleep_for(retry.delay_after(attempt));
  }
  throw Error(ErrorCode::kUnreachable,
              to_string(dest) + " after " + std::to_string(attempts) + " attempts");
}

void broadcast_msg(std::span<const Endpoint> dests, const Envelope& env, NetBackend& backend,
                   const RetryPolicy& retry) {
  std::vector<Endpoint> failed;
  for (const auto& dest : dests) {
    try {
      send_msg(dest, env, backend, retry);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnreachable) throw;
      failed.push_back(dest);
    }
  }
  if (!failed.empty()) throw PartialBroadcast(std::move(failed));
}

Envelope rcv_msg(Inbox& inbox, Timeout timeout) { return inbox.pop(timeout); }

std::vector<Envelope> rcv_msgs(Inbox& inbox, std::size_t count, Timeout timeout) {
  std::vector<Envelope> out;
  out.reserve(count);
  while (out.size() < count) {
    try {
      out.push_back(inbox.pop(timeout));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTimeout) throw RecvTimeout(count, std::move(out));
      throw;
    }
  }
  return out;
}

}  // namespace flamesh
