#include "node_env.hpp"

#include <cstdlib>
#include <map>
#include <sstream>

#include "flamesh/error.hpp"

namespace flamesh::tools {
namespace {

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return (v && *v) ? v : nullptr;
}

long env_long(const char* name, long fallback) {
  const char* v = env(name);
  if (!v) return fallback;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 0) throw Error(ErrorCode::kInvalidArgs, std::string(name) + " must be a non-negative integer");
  return n;
}

}  // namespace

TestbedOptions options_from_env() {
  TestbedOptions opts;
  if (const char* ip = env("FLAMESH_SELF_IP")) opts.self_ip = ip;
  long timeout_ms = env_long("FLAMESH_RECV_TIMEOUT_MS", 30000);
  if (timeout_ms == 0)
    opts.recv_timeout = std::nullopt;
  else
    opts.recv_timeout = std::chrono::milliseconds(timeout_ms);
  opts.retry.attempts = static_cast<int>(env_long("FLAMESH_CONNECT_ATTEMPTS", opts.retry.attempts));
  return opts;
}

apps::ReadingSource parse_readings(const std::string& text) {
  std::map<int, double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kInvalidArgs, "FLAMESH_READINGS entry '" + item + "' needs id=value");
    try {
      values[std::stoi(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgs, "FLAMESH_READINGS entry '" + item + "' is not numeric");
    }
  }
  return [values](int node_id) -> std::optional<double> {
    auto it = values.find(node_id);
    if (it == values.end()) return std::nullopt;
    return it->second;
  };
}

apps::ReadingSource readings_from_env() {
  const char* v = env("FLAMESH_READINGS");
  if (!v) return {};
  return parse_readings(v);
}

}  // namespace flamesh::tools
