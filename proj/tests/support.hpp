#pragma once

#include <unistd.h>

#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "flamesh/launcher.hpp"
#include "flamesh/tcp_backend.hpp"
#include "flamesh/wire.hpp"

namespace flamesh::test {

/// Loopback address private to one test, so fixed ports never collide.
inline std::string loopback(int k) { return "127.0.0." + std::to_string(k); }

struct ThreadRun {
  std::vector<FlData> results;
  std::vector<std::exception_ptr> errors;

  bool ok() const {
    for (const auto& e : errors)
      if (e) return false;
    return true;
  }
  /// Rethrows the first failure in node-id order.
  void rethrow() const {
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
};

/// Runs fn(id, backend) for every id on its own thread over real TCP.
inline ThreadRun run_tcp_threads(int no_nodes, const std::function<FlData(int, NetBackend&)>& fn) {
  ThreadRun run;
  run.results.resize(static_cast<std::size_t>(no_nodes));
  run.errors.resize(static_cast<std::size_t>(no_nodes));
  std::vector<std::thread> threads;
  for (int i = 0; i < no_nodes; ++i) {
    threads.emplace_back([&, i] {
      TcpBackend backend;
      try {
        run.results[static_cast<std::size_t>(i)] = fn(i, backend);
      } catch (...) {
        run.errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  return run;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("flamesh-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Launcher options pointing at the node runner built alongside the tests.
inline launcher::LaunchOptions node_launch_options(const std::filesystem::path& log_dir) {
  launcher::LaunchOptions opts;
  opts.node_binary = FLAMESH_NODE_BIN;
  opts.log_dir = log_dir;
  opts.env["FLAMESH_RECV_TIMEOUT_MS"] = "20000";
  opts.deadline = std::chrono::seconds(30);
  return opts;
}

}  // namespace flamesh::test
