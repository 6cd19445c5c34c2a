#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flamesh/net_backend.hpp"
#include "flamesh/wire.hpp"

namespace flamesh {

/// splitmix64. Fixed so delivery schedules reproduce across implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();

  /// Uniform in [lo, hi] (inclusive), by modulo reduction.
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);

  /// Uniform in [0, 1) from the top 53 bits.
  double unit();

 private:
  std::uint64_t state_;
};

struct SimConfig {
  std::uint64_t seed = 0;
  std::chrono::milliseconds delay_min{0};
  std::chrono::milliseconds delay_max{0};
  double drop_probability = 0.0;
  /// Virtual-time limit; the run fails with SimDeadlock past it.
  Duration horizon = std::chrono::hours(1);
  bool record_events = false;
};

/// What a node program gets to work with.
struct NodeEnv {
  int no_nodes = 0;
  int node_id = 0;
  std::string ip;
  NetBackend& backend;
};

using NodeMain = std::function<FlData(const NodeEnv&)>;

/// Address a simulated node listens on: 10.0.0.(id + 1).
std::string sim_ip(int node_id);

/// Deterministic in-memory network with a virtual clock.
///
/// Every closed outbound stream becomes one delivery event at
/// now + delay, delay drawn uniformly from [delay_min, delay_max] in
/// microseconds; if drop_probability > 0 a second draw may discard it.
/// Node programs passed to run() execute one at a time; the clock only
/// advances when none of them can make progress. The same seed and the same
/// programs give the same schedule.
///
/// Blocking calls (Inbox::pop, sleep_for) are only legal from inside run().
/// The SimNet must outlive every inbox and listener it hands out.
class SimNet final : public NetBackend {
 public:
  explicit SimNet(SimConfig cfg = {});
  ~SimNet() override;

  SimNet(const SimNet&) = delete;
  SimNet& operator=(const SimNet&) = delete;

  std::unique_ptr<ListenerHandle> listen(const Endpoint& ep, ConnectionHandler handler) override;
  std::unique_ptr<ByteSink> connect(const Endpoint& ep) override;
  std::shared_ptr<Inbox> make_inbox() override;
  void sleep_for(Duration d) override;

  Duration now() const;

  /// Runs mains[i] as node i (of mains.size()) to completion. Throws
  /// NodeError for the first node that fails and SimDeadlock if every node
  /// is blocked with nothing left to deliver or the horizon is passed.
  std::vector<FlData> run(const std::vector<NodeMain>& mains);

  /// Per-node event lines, when record_events is set: one line per send,
  /// receive or drop.
  const std::vector<std::string>& events(int node_id) const;

  std::uint64_t frames_delivered() const;
  std::uint64_t frames_dropped() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<NetBackend> sim_backend(const SimConfig& cfg);

/// Convenience: fresh SimNet, run, return results.
std::vector<FlData> run_nodes(const std::vector<NodeMain>& mains, const SimConfig& cfg = {});

}  // namespace flamesh
