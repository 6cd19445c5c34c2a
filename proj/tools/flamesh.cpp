// flamesh: launch node processes, run apps on the simulated network, print
// TDM schedules.
//
//   flamesh launch <app> <noNodes> <idspec> [args...]
//   flamesh sim <app> <noNodes> [args...] [--seed S] [--delay-min MS] [--delay-max MS]
//   flamesh schedule <noNodes> <noTSlots>

#include <unistd.h>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flamesh/apps.hpp"
#include "flamesh/error.hpp"
#include "flamesh/launcher.hpp"
#include "flamesh/simnet.hpp"
#include "node_env.hpp"

namespace {

using namespace flamesh;

std::filesystem::path default_node_binary() {
  if (const char* env = std::getenv("FLAMESH_NODE_BIN")) return env;
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (ec) return "flamesh-node";
  return self.parent_path() / "flamesh-node";
}

int cmd_launch(const std::string& app, int no_nodes, const std::string& idspec,
               const std::vector<std::string>& extra) {
  auto spec = launcher::parse_spec(idspec, no_nodes);
  auto plan = launcher::LaunchPlan::make(app, no_nodes, spec, extra);
  launcher::LaunchOptions opts;
  opts.node_binary = default_node_binary();
  if (const char* dir = std::getenv("FLAMESH_LOG_DIR")) opts.log_dir = dir;
  auto report = launcher::launch(plan, opts);
  for (const auto& n : report.nodes) std::cout << n.to_json() << '\n';
  return report.all_ok() ? 0 : 1;
}

int cmd_sim(const std::string& app, int no_nodes, const std::vector<std::string>& extra, const SimConfig& cfg) {
  if (!apps::find_app(app)) throw Error(ErrorCode::kInvalidArgs, "unknown app '" + app + "'");
  auto base_opts = tools::options_from_env();
  auto readings = tools::readings_from_env();
  std::vector<NodeMain> mains;
  for (int i = 0; i < no_nodes; ++i) {
    mains.push_back([&, i](const NodeEnv& env) {
      std::vector<std::string> argv = {app, std::to_string(no_nodes), std::to_string(i)};
      argv.insert(argv.end(), extra.begin(), extra.end());
      apps::AppContext ctx{env.backend, base_opts, readings};
      ctx.options.self_ip.clear();
      return apps::run_app(argv, ctx);
    });
  }
  SimNet net(cfg);
  auto results = net.run(mains);
  for (int i = 0; i < no_nodes; ++i) {
    if (cfg.record_events)
      for (const auto& line : net.events(i)) std::cout << "# node" << i << ' ' << line << '\n';
    std::cout << apps::result_line(i, results[static_cast<std::size_t>(i)]) << '\n';
  }
  return 0;
}

int cmd_schedule(int no_nodes, int no_tslots) {
  auto s = apps::isl_scheduling(no_nodes, no_tslots);
  for (int t = 0; t < no_tslots; ++t) {
    std::cout << "slot " << t << ':';
    for (int i = 0; i < no_nodes; ++i) {
      int p = s.at({t, i});
      if (i < p) std::cout << ' ' << i << "<->" << p;
    }
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"flamesh: federated-learning testbed runtime"};
  cli.require_subcommand(1);

  std::string app;
  int no_nodes = 0;
  std::string idspec;
  std::vector<std::string> extra;

  auto* launch = cli.add_subcommand("launch", "spawn node processes on this host");
  launch->add_option("app", app, "built-in app name or executable")->required();
  launch->add_option("noNodes", no_nodes)->required();
  launch->add_option("idspec", idspec, "'id' for all nodes or 'i-j'")->required();
  launch->add_option("args", extra, "passed to every node after [app, noNodes, nodeId]");

  SimConfig cfg;
  long delay_min = 0;
  long delay_max = 0;
  auto* sim = cli.add_subcommand("sim", "run every node in the deterministic simulator");
  sim->add_option("app", app)->required();
  sim->add_option("noNodes", no_nodes)->required();
  sim->add_option("args", extra);
  sim->add_option("--seed", cfg.seed);
  sim->add_option("--delay-min", delay_min, "milliseconds");
  sim->add_option("--delay-max", delay_max, "milliseconds");
  sim->add_option("--drop", cfg.drop_probability);
  sim->add_flag("--events", cfg.record_events, "print per-node event logs");

  int no_tslots = 0;
  auto* schedule = cli.add_subcommand("schedule", "print the inter-satellite link schedule");
  schedule->add_option("noNodes", no_nodes)->required();
  schedule->add_option("noTSlots", no_tslots)->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (launch->parsed()) return cmd_launch(app, no_nodes, idspec, extra);
    if (sim->parsed()) {
      cfg.delay_min = std::chrono::milliseconds(delay_min);
      cfg.delay_max = std::chrono::milliseconds(delay_max);
      return cmd_sim(app, no_nodes, extra, cfg);
    }
    if (schedule->parsed()) return cmd_schedule(no_nodes, no_tslots);
  } catch (const flamesh::Error& e) {
    std::cerr << "flamesh: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
