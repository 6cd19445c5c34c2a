#include "flamesh/tcp_backend.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <iostream>
#include <thread>

#include "flamesh/error.hpp"

namespace flamesh {
namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::optional<sockaddr_in> resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(ep.port));
  if (::inet_pton(AF_INET, ep.ip.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.ip.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) return std::nullopt;
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

void set_timeouts(int fd, Duration d) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(d.count() / 1'000'000);
  tv.tv_usec = static_cast<suseconds_t>(d.count() % 1'000'000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

class FdSource final : public ByteSource {
 public:
  explicit FdSource(int fd) : fd_(fd) {}

  std::size_t read_some(std::span<std::uint8_t> out) override {
    for (;;) {
      auto n = ::recv(fd_, out.data(), out.size(), 0);
      if (n > 0) return static_cast<std::size_t>(n);
      if (n < 0 && errno == EINTR) continue;
      return 0;
    }
  }

 private:
  int fd_;
};

class FdSink final : public ByteSink {
 public:
  explicit FdSink(Fd fd) : fd_(std::move(fd)) {}

  bool write(std::span<const std::uint8_t> bytes) override {
    while (!bytes.empty()) {
      auto n = ::send(fd_.get(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      bytes = bytes.subspan(static_cast<std::size_t>(n));
    }
    return true;
  }

  bool close() override {
    if (!fd_.valid()) return true;
    bool ok = ::shutdown(fd_.get(), SHUT_WR) == 0;
    fd_.reset();
    return ok;
  }

 private:
  Fd fd_;
};

class TcpListener final : public ListenerHandle {
 public:
  TcpListener(Fd sock, NetBackend::ConnectionHandler handler, Duration io_timeout)
      : sock_(std::move(sock)), handler_(std::move(handler)), io_timeout_(io_timeout) {
    int pipe_fds[2];
    if (::pipe2(pipe_fds, O_CLOEXEC) != 0) throw Error(ErrorCode::kBindFailure, "pipe2 failed");
    wake_read_ = Fd(pipe_fds[0]);
    wake_write_ = Fd(pipe_fds[1]);
    thread_ = std::thread([this] { accept_loop(); });
  }

  ~TcpListener() override { stop(); }

  void stop() override {
    if (stopped_.exchange(true)) return;
    char b = 1;
    [[maybe_unused]] auto rc = ::write(wake_write_.get(), &b, 1);
    if (thread_.joinable()) thread_.join();
    sock_.reset();
  }

 private:
  void accept_loop() {
    for (;;) {
      pollfd fds[2] = {{sock_.get(), POLLIN, 0}, {wake_read_.get(), POLLIN, 0}};
      if (::poll(fds, 2, -1) < 0) {
        if (errno == EINTR) continue;
        return;
      }
      if (fds[1].revents != 0) return;
      if ((fds[0].revents & POLLIN) == 0) continue;
      Fd conn(::accept4(sock_.get(), nullptr, nullptr, SOCK_CLOEXEC));
      if (!conn.valid()) continue;
      set_timeouts(conn.get(), io_timeout_);
      FdSource src(conn.get());
      try {
        handler_(src);
      } catch (const std::exception& e) {
        std::cerr << "flamesh: listener dropped a connection: " << e.what() << '\n';
      }
    }
  }

  Fd sock_;
  NetBackend::ConnectionHandler handler_;
  Duration io_timeout_;
  Fd wake_read_;
  Fd wake_write_;
  std::atomic<bool> stopped_{false};
  std::thread thread_;
};

}  // namespace

std::unique_ptr<ListenerHandle> TcpBackend::listen(const Endpoint& ep, ConnectionHandler handler) {
  auto addr = resolve(ep);
  if (!addr) throw Error(ErrorCode::kBindFailure, "cannot resolve " + ep.ip);
  Fd sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) throw Error(ErrorCode::kBindFailure, std::strerror(errno));
  int one = 1;
  ::setsockopt(sock.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(sock.get(), reinterpret_cast<sockaddr*>(&*addr), sizeof(*addr)) != 0)
    throw Error(ErrorCode::kBindFailure, to_string(ep) + ": " + std::strerror(errno));
  if (::listen(sock.get(), SOMAXCONN) != 0) throw Error(ErrorCode::kBindFailure, std::strerror(errno));
  return std::make_unique<TcpListener>(std::move(sock), std::move(handler), opts_.io_timeout);
}

std::unique_ptr<ByteSink> TcpBackend::connect(const Endpoint& ep) {
  auto addr = resolve(ep);
  if (!addr) return nullptr;
  Fd sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock.valid()) return nullptr;
  set_timeouts(sock.get(), opts_.connect_timeout);
  int one = 1;
  ::setsockopt(sock.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  for (;;) {
    if (::connect(sock.get(), reinterpret_cast<sockaddr*>(&*addr), sizeof(*addr)) == 0) break;
    if (errno == EINTR) continue;
    return nullptr;
  }
  set_timeouts(sock.get(), opts_.io_timeout);
  return std::make_unique<FdSink>(std::move(sock));
}

std::shared_ptr<Inbox> TcpBackend::make_inbox() { return std::make_shared<ThreadInbox>(); }

void TcpBackend::sleep_for(Duration d) { std::this_thread::sleep_for(d); }

}  // namespace flamesh
