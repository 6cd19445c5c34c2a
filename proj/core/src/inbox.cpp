#include "flamesh/error.hpp"
#include "flamesh/net_backend.hpp"
#include "flamesh/tcp_backend.hpp"

namespace flamesh {

bool ByteSource::read_exact(std::span<std::uint8_t> out) {
  while (!out.empty()) {
    auto n = read_some(out);
    if (n == 0) return false;
    out = out.subspan(n);
  }
  return true;
}

void ThreadInbox::push(Envelope env) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    queue_.push_back(std::move(env));
  }
  cv_.notify_one();
}

void ThreadInbox::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

Envelope ThreadInbox::pop(Timeout timeout) {
  std::unique_lock lk(mu_);
  auto ready = [this] { return !queue_.empty() || closed_; };
  if (timeout) {
    if (!cv_.wait_for(lk, *timeout, ready)) throw Error(ErrorCode::kTimeout, "no message within timeout");
  } else {
    cv_.wait(lk, ready);
  }
  if (queue_.empty()) throw Error(ErrorCode::kClosed, "inbox closed");
  Envelope env = std::move(queue_.front());
  queue_.pop_front();
  return env;
}

std::size_t ThreadInbox::size() const {
  std::lock_guard lk(mu_);
  return queue_.size();
}

bool ThreadInbox::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

}  // namespace flamesh
