#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flamesh/error.hpp"
#include "flamesh/net_backend.hpp"

namespace flamesh::launcher {

/// "id" (every node) or "i-j" (inclusive range).
struct IdSpecifier {
  bool all = true;
  int first = 0;
  int last = 0;

  static IdSpecifier everyone() { return {}; }
  static IdSpecifier range(int i, int j) { return {false, i, j}; }

  friend bool operator==(const IdSpecifier&, const IdSpecifier&) = default;
};

/// Throws Error(BadSpecifier) on syntax, Error(OutOfRange) when j >= n or
/// j < i.
IdSpecifier parse_spec(std::string_view text, int no_nodes);
std::string format_spec(const IdSpecifier& spec);
std::vector<int> resolve(const IdSpecifier& spec, int no_nodes);

struct LaunchPlan {
  std::string app;
  int no_nodes = 0;
  std::vector<int> ids;
  std::vector<std::string> extra_args;

  static LaunchPlan make(std::string app, int no_nodes, const IdSpecifier& spec,
                         std::vector<std::string> extra_args);

  /// [app, n, id, extra...]
  std::vector<std::string> argv_for(int node_id) const;

  /// Throws Error(InvalidPlan).
  void validate() const;
};

struct LaunchOptions {
  /// Binary that runs built-in apps (dispatching on argv[0]).
  std::filesystem::path node_binary;
  /// Per-node logs go to <log_dir>/node<id>.log.
  std::filesystem::path log_dir = ".";
  /// Added to (or overriding) the inherited environment.
  std::map<std::string, std::string> env;
  /// Children still running after this long are killed.
  std::optional<Duration> deadline;
};

/// Exit codes the node runner uses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTimeout = 3;
inline constexpr int kExitUnreachable = 4;
inline constexpr int kExitProtocol = 5;

int exit_code_for(ErrorCode code);

struct NodeReport {
  int node_id = 0;
  int exit_code = -1;
  std::string status;  // ok, timeout, unreachable, usage, protocol, failed, signal, killed
  std::optional<std::string> result;  // text after "value=" on the last RESULT line
  std::filesystem::path log;

  /// One-line JSON object.
  std::string to_json() const;
};

struct LaunchReport {
  std::vector<NodeReport> nodes;

  bool all_ok() const;
  const NodeReport* node(int node_id) const;

  /// Throws Error(NonzeroExit) naming the first failed node.
  void check() const;
};

/// Spawns one process per id and waits for all of them. Throws
/// Error(SpawnFailure) if a child cannot be started (already started children
/// are killed first).
LaunchReport launch(const LaunchPlan& plan, const LaunchOptions& opts);

/// Last "RESULT nodeId=<k> value=<v>" value in a log, if any.
std::optional<std::string> find_result(const std::filesystem::path& log);

}  // namespace flamesh::launcher
