#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flamesh/net_backend.hpp"
#include "flamesh/runtime.hpp"
#include "flamesh/wire.hpp"

namespace flamesh::apps {

/// Temperature override per node. nullopt keeps the built-in default.
using ReadingSource = std::function<std::optional<double>(int node_id)>;

/// Everything an app needs besides its argv.
struct AppContext {
  NetBackend& backend;
  TestbedOptions options;
  ReadingSource readings;
};

inline constexpr double kThreshold = 20.83;
inline constexpr double kDefaultReading = 20.0;
inline constexpr double kLastNodeReading = 21.39;

// Callbacks, exposed so the oracles in tests can reuse them.
FlData fed_map_client(const FlData& local, const FlData& priv, const FlData& msg);
FlData fed_map_server(const FlData& priv, const std::vector<FlData>& msgs);
FlData avg_client(const FlData& local, const FlData& priv, const FlData& msg);
FlData avg_server(const FlData& priv, const std::vector<FlData>& msgs);
double odts_update(double state, double obs);

/// Fraction of clients whose reading is strictly above the server's
/// threshold. One centralized iteration.
FlData example1_fed_map(int no_nodes, int node_id, int fl_srv_id, const std::string& master_ip,
                        const AppContext& ctx);

/// Centralized averaging of [nodeId + 1].
FlData example2_cent_avg(int no_nodes, int node_id, int fl_srv_id, const std::string& master_ip,
                         const AppContext& ctx, int no_iters = 10);

/// Decentralized averaging of [nodeId + 1].
FlData example3_decent_avg(int no_nodes, int node_id, const std::string& master_ip, const AppContext& ctx,
                           int no_iters = 3);

/// (slot, nodeId) -> peerId
using Schedule = std::map<std::pair<int, int>, int>;

/// Even slots pair i with n-1-i, odd slots pair i with i^1.
/// Throws Error(OddNodeCount) unless no_nodes is even.
Schedule isl_scheduling(int no_nodes, int no_tslots);

struct OdtsHooks {
  std::function<void(int block, int slot)> before_exchange;
  std::function<void(int block, int slot, double state)> after_update;
  /// Called once with the testbed counters after the last slot.
  std::function<void(const TestbedStats&)> finished;
};

/// Simplified ODTS: exchange the fixed odata = 1 + nodeId with the
/// scheduled peer every slot and average it into the state.
double example4_odts(int no_nodes, int node_id, int no_blocks, int no_tslots, const std::string& master_ip,
                     const AppContext& ctx, const OdtsHooks& hooks = {});

/// Launcher-facing description of a runnable app.
struct AppInfo {
  std::string name;
  std::vector<std::string> aliases;
  /// Names of the positional args after [app, n, id].
  std::vector<std::string> extra_args;
  std::function<FlData(std::span<const std::string> argv, const AppContext& ctx)> run;
};

const std::vector<AppInfo>& registry();

/// Lookup by name or alias; nullptr if unknown.
const AppInfo* find_app(std::string_view name);

/// Runs argv = [app, n, id, extra...]. Throws Error(InvalidArgs) on a bad
/// argument vector.
FlData run_app(std::span<const std::string> argv, const AppContext& ctx);

/// "RESULT nodeId=<k> value=<v>"
std::string result_line(int node_id, const FlData& value);

/// Text form of data as it appears on the wire (null / number / [..]).
std::string format_data(const FlData& value);

}  // namespace flamesh::apps
