#include "flamesh/launcher.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include "flamesh/apps.hpp"
#include "json.hpp"

extern char** environ;

namespace flamesh::launcher {
namespace {

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

IdSpecifier parse_spec(std::string_view text, int no_nodes) {
  if (no_nodes < 1) throw Error(ErrorCode::kInvalidArgs, "noNodes must be >= 1");
  if (text == "id") return IdSpecifier::everyone();
  auto dash = text.find('-');
  if (dash == std::string_view::npos) throw Error(ErrorCode::kBadSpecifier, "expected 'id' or 'i-j'");
  auto i = to_int(text.substr(0, dash));
  auto j = to_int(text.substr(dash + 1));
  if (!i || !j || *i < 0) throw Error(ErrorCode::kBadSpecifier, "expected 'id' or 'i-j', got '" + std::string(text) + "'");
  if (*j < *i || *j >= no_nodes)
    throw Error(ErrorCode::kOutOfRange, "range " + std::string(text) + " outside [0, " + std::to_string(no_nodes - 1) + "]");
  return IdSpecifier::range(*i, *j);
}

std::string format_spec(const IdSpecifier& spec) {
  if (spec.all) return "id";
  return std::to_string(spec.first) + "-" + std::to_string(spec.last);
}

std::vector<int> resolve(const IdSpecifier& spec, int no_nodes) {
  int lo = spec.all ? 0 : spec.first;
  int hi = spec.all ? no_nodes - 1 : spec.last;
  std::vector<int> ids;
  for (int i = lo; i <= hi; ++i) ids.push_back(i);
  return ids;
}

LaunchPlan LaunchPlan::make(std::string app, int no_nodes, const IdSpecifier& spec,
                            std::vector<std::string> extra_args) {
  LaunchPlan p{std::move(app), no_nodes, resolve(spec, no_nodes), std::move(extra_args)};
  p.validate();
  return p;
}

std::vector<std::string> LaunchPlan::argv_for(int node_id) const {
  std::vector<std::string> argv = {app, std::to_string(no_nodes), std::to_string(node_id)};
  argv.insert(argv.end(), extra_args.begin(), extra_args.end());
  return argv;
}

void LaunchPlan::validate() const {
  if (app.empty()) throw Error(ErrorCode::kInvalidPlan, "no app given");
  if (no_nodes < 1) throw Error(ErrorCode::kInvalidPlan, "noNodes must be >= 1");
  if (ids.empty()) throw Error(ErrorCode::kInvalidPlan, "no node ids to launch");
  for (int id : ids)
    if (id < 0 || id >= no_nodes) throw Error(ErrorCode::kInvalidPlan, "node id " + std::to_string(id) + " out of range");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTimeout: return kExitTimeout;
    case ErrorCode::kUnreachable:
    case ErrorCode::kPartialBroadcast: return kExitUnreachable;
    case ErrorCode::kInvalidArgs: return kExitUsage;
    case ErrorCode::kMalformedPayload:
    case ErrorCode::kProtocolSkew:
    case ErrorCode::kSlotReplay:
    case ErrorCode::kDuplicateNodeId: return kExitProtocol;
    default: return kExitFailure;
  }
}

namespace {

std::string status_for(int exit_code) {
  switch (exit_code) {
    case kExitOk: return "ok";
    case kExitUsage: return "usage";
    case kExitTimeout: return "timeout";
    case kExitUnreachable: return "unreachable";
    case kExitProtocol: return "protocol";
    default: return "failed";
  }
}

struct Child {
  int node_id;
  pid_t pid;
  std::filesystem::path log;
};

std::vector<std::string> build_env(const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    auto key = kv.substr(0, kv.find('='));
    if (!overrides.count(std::string(key))) env.emplace_back(kv);
  }
  for (const auto& [k, v] : overrides) env.push_back(k + "=" + v);
  return env;
}

std::vector<char*> c_array(std::vector<std::string>& strs) {
  std::vector<char*> out;
  for (auto& s : strs) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

void fill_status(NodeReport& r, int wstatus) {
  if (WIFEXITED(wstatus)) {
    r.exit_code = WEXITSTATUS(wstatus);
    r.status = status_for(r.exit_code);
  } else if (WIFSIGNALED(wstatus)) {
    r.exit_code = 128 + WTERMSIG(wstatus);
    r.status = "signal";
  }
}

}  // namespace

std::string NodeReport::to_json() const {
  nlohmann::json j;
  j["node"] = node_id;
  j["status"] = status;
  j["exit"] = exit_code;
  j["result"] = result ? nlohmann::json(*result) : nlohmann::json(nullptr);
  j["log"] = log.string();
  return j.dump();
}

bool LaunchReport::all_ok() const {
  for (const auto& n : nodes)
    if (n.exit_code != 0) return false;
  return !nodes.empty();
}

const NodeReport* LaunchReport::node(int node_id) const {
  for (const auto& n : nodes)
    if (n.node_id == node_id) return &n;
  return nullptr;
}

void LaunchReport::check() const {
  for (const auto& n : nodes)
    if (n.exit_code != 0)
      throw Error(ErrorCode::kNonzeroExit, "node " + std::to_string(n.node_id) + " exited with status " + n.status);
}

std::optional<std::string> find_result(const std::filesystem::path& log) {
  std::ifstream in(log);
  std::optional<std::string> result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("RESULT ", 0) != 0) continue;
    auto pos = line.find(" value=");
    if (pos != std::string::npos) result = line.substr(pos + 7);
  }
  return result;
}

LaunchReport launch(const LaunchPlan& plan, const LaunchOptions& opts) {
  plan.validate();
  const bool builtin = apps::find_app(plan.app) != nullptr;
  if (builtin && opts.node_binary.empty()) throw Error(ErrorCode::kInvalidPlan, "no node binary configured");
  std::filesystem::create_directories(opts.log_dir);

  auto env_strings = build_env(opts.env);
  auto envp = c_array(env_strings);

  std::vector<Child> children;
  auto kill_all = [&] {
    for (auto& c : children) {
      ::kill(c.pid, SIGKILL);
      ::waitpid(c.pid, nullptr, 0);
    }
  };

  for (int id : plan.ids) {
    auto argv_strings = plan.argv_for(id);
    auto argv = c_array(argv_strings);
    auto log = opts.log_dir / ("node" + std::to_string(id) + ".log");

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

    pid_t pid = 0;
    int rc = builtin ? ::posix_spawn(&pid, opts.node_binary.c_str(), &actions, nullptr, argv.data(), envp.data())
                     : ::posix_spawnp(&pid, plan.app.c_str(), &actions, nullptr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
      kill_all();
      throw Error(ErrorCode::kSpawnFailure, "node " + std::to_string(id) + ": " + std::strerror(rc));
    }
    children.push_back({id, pid, log});
  }

  LaunchReport report;
  for (const auto& c : children) report.nodes.push_back(NodeReport{c.node_id, -1, "", std::nullopt, c.log});

  if (!opts.deadline) {
    for (std::size_t i = 0; i < children.size(); ++i) {
      int ws = 0;
      ::waitpid(children[i].pid, &ws, 0);
      fill_status(report.nodes[i], ws);
    }
  } else {
    auto until = std::chrono::steady_clock::now() + *opts.deadline;
    std::size_t remaining = children.size();
    while (remaining > 0) {
      for (std::size_t i = 0; i < children.size(); ++i) {
        if (report.nodes[i].exit_code >= 0) continue;
        int ws = 0;
        if (::waitpid(children[i].pid, &ws, WNOHANG) == children[i].pid) {
          fill_status(report.nodes[i], ws);
          --remaining;
        }
      }
      if (remaining == 0) break;
      if (std::chrono::steady_clock::now() >= until) {
        for (std::size_t i = 0; i < children.size(); ++i) {
          if (report.nodes[i].exit_code >= 0) continue;
          ::kill(children[i].pid, SIGKILL);
          ::waitpid(children[i].pid, nullptr, 0);
          report.nodes[i].exit_code = 128 + SIGKILL;
          report.nodes[i].status = "killed";
        }
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  for (auto& n : report.nodes) n.result = find_result(n.log);
  return report;
}

}  // namespace flamesh::launcher
