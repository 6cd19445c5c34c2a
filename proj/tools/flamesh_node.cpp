// Runs one node of a built-in app over TCP.
//
// The launcher execs this binary with argv[0] set to the app name, so the
// argument vector is exactly [app, noNodes, nodeId, extra...]. Invoked by
// hand it also accepts `flamesh-node <app> <noNodes> <nodeId> extra...`.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "flamesh/apps.hpp"
#include "flamesh/error.hpp"
#include "flamesh/launcher.hpp"
#include "flamesh/tcp_backend.hpp"
#include "node_env.hpp"

int main(int argc, char** argv) {
  using namespace flamesh;

  std::vector<std::string> args(argv, argv + argc);
  if (!args.empty() && !apps::find_app(std::filesystem::path(args[0]).filename().string()))
    args.erase(args.begin());
  if (!args.empty()) args[0] = std::filesystem::path(args[0]).filename().string();

  if (args.empty()) {
    std::cerr << "usage: flamesh-node <app> <noNodes> <nodeId> [args...]\napps:";
    for (const auto& app : apps::registry()) std::cerr << ' ' << app.name;
    std::cerr << '\n';
    return launcher::kExitUsage;
  }

  try {
    TcpBackend backend;
    apps::AppContext ctx{backend, tools::options_from_env(), tools::readings_from_env()};
    FlData value = apps::run_app(args, ctx);
    std::cout << apps::result_line(std::stoi(args[2]), value) << std::endl;
    return launcher::kExitOk;
  } catch (const Error& e) {
    std::cerr << "flamesh-node: " << e.what() << std::endl;
    return launcher::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "flamesh-node: " << e.what() << std::endl;
    return launcher::kExitFailure;
  }
}
