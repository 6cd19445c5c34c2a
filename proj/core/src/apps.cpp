#include "flamesh/apps.hpp"

#include <charconv>

#include "flamesh/error.hpp"

namespace flamesh::apps {

FlData fed_map_client(const FlData& local, const FlData& /*priv*/, const FlData& msg) {
  double reading = local.head();
  double threshold = msg.head();
  return FlData(reading > threshold ? 1.0 : 0.0);
}

FlData fed_map_server(const FlData& /*priv*/, const std::vector<FlData>& msgs) {
  double sum = 0.0;
  for (const auto& m : msgs) sum += m.head();
  return FlData(sum / static_cast<double>(msgs.size()));
}

FlData avg_client(const FlData& local, const FlData& /*priv*/, const FlData& msg) {
  return FlData{(local.head() + msg.head()) / 2};
}

FlData avg_server(const FlData& /*priv*/, const std::vector<FlData>& msgs) {
  double tmp = 0.0;
  for (const auto& lst : msgs) tmp = tmp + lst.head();
  tmp = tmp / static_cast<double>(msgs.size());
  return FlData{tmp};
}

double odts_update(double state, double obs) { return (state + obs) / 2.0; }

FlData example1_fed_map(int no_nodes, int node_id, int fl_srv_id, const std::string& master_ip,
                        const AppContext& ctx) {
  Testbed ptb(no_nodes, node_id, fl_srv_id, master_ip, ctx.backend, ctx.options);
  ptb.start();
  double local = kThreshold;
  if (node_id != fl_srv_id) {
    local = node_id == no_nodes - 1 ? kLastNodeReading : kDefaultReading;
    if (ctx.readings)
      if (auto r = ctx.readings(node_id)) local = *r;
  }
  return ptb.fl_centralized(fed_map_server, fed_map_client, FlData(local), FlData::absent());
}

FlData example2_cent_avg(int no_nodes, int node_id, int fl_srv_id, const std::string& master_ip,
                         const AppContext& ctx, int no_iters) {
  Testbed ptb(no_nodes, node_id, fl_srv_id, master_ip, ctx.backend, ctx.options);
  ptb.start();
  FlData local{static_cast<double>(node_id + 1)};
  return ptb.fl_centralized(avg_server, avg_client, std::move(local), FlData::absent(), no_iters);
}

FlData example3_decent_avg(int no_nodes, int node_id, const std::string& master_ip, const AppContext& ctx,
                           int no_iters) {
  // flSrvId is unused by the decentralized algorithm.
  Testbed ptb(no_nodes, node_id, 0, master_ip, ctx.backend, ctx.options);
  ptb.start();
  FlData local{static_cast<double>(node_id + 1)};
  return ptb.fl_decentralized(avg_server, avg_client, std::move(local), FlData::absent(), no_iters);
}

Schedule isl_scheduling(int no_nodes, int no_tslots) {
  if (no_nodes % 2 != 0) throw Error(ErrorCode::kOddNodeCount, std::to_string(no_nodes) + " nodes cannot be paired");
  if (no_nodes < 2) throw Error(ErrorCode::kInvalidArgs, "need at least two nodes");
  if (no_tslots < 0) throw Error(ErrorCode::kInvalidArgs, "negative slot count");
  Schedule s;
  for (int t = 0; t < no_tslots; ++t)
    for (int i = 0; i < no_nodes; ++i) s[{t, i}] = (t % 2 == 0) ? no_nodes - 1 - i : (i ^ 1);
  return s;
}

double example4_odts(int no_nodes, int node_id, int no_blocks, int no_tslots, const std::string& master_ip,
                     const AppContext& ctx, const OdtsHooks& hooks) {
  const auto connections = isl_scheduling(no_nodes, no_tslots);
  Testbed ptb(no_nodes, node_id, 0, master_ip, ctx.backend, ctx.options);
  ptb.start();
  const double odata = 1.0 + node_id;
  double state = odata;
  for (int block = 0; block < no_blocks; ++block) {
    for (int slot = 0; slot < no_tslots; ++slot) {
      int peer = connections.at({slot, node_id});
      if (hooks.before_exchange) hooks.before_exchange(block, slot);
      FlData obs = ptb.get1_meas(peer, FlData(odata));
      state = odts_update(state, obs.scalar());
      if (hooks.after_update) hooks.after_update(block, slot, state);
    }
  }
  if (hooks.finished) hooks.finished(ptb.stats());
  return state;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

int parse_int(const std::string& s, const char* what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::kInvalidArgs, std::string(what) + ": not an integer: '" + s + "'");
  return v;
}

std::vector<AppInfo> make_registry() {
  std::vector<AppInfo> r;
  r.push_back({"example1_fed_map",
               {"mp_async_example1_fedd_mean.py", "example1"},
               {"flSrvId", "mrIpAdr"},
               [](std::span<const std::string> a, const AppContext& ctx) {
                 return example1_fed_map(parse_int(a[1], "noNodes"), parse_int(a[2], "nodeId"),
                                         parse_int(a[3], "flSrvId"), a[4], ctx);
               }});
  r.push_back({"example2_cent_avg",
               {"mp_async_example2_cent_avg.py", "example2"},
               {"flSrvId", "mrIpAdr"},
               [](std::span<const std::string> a, const AppContext& ctx) {
                 return example2_cent_avg(parse_int(a[1], "noNodes"), parse_int(a[2], "nodeId"),
                                          parse_int(a[3], "flSrvId"), a[4], ctx);
               }});
  r.push_back({"example3_decent_avg",
               {"mp_async_example3_decent_avg.py", "example3"},
               {"mrIpAdr"},
               [](std::span<const std::string> a, const AppContext& ctx) {
                 return example3_decent_avg(parse_int(a[1], "noNodes"), parse_int(a[2], "nodeId"), a[3], ctx);
               }});
  r.push_back({"example4_odts",
               {"mp_async_example6_odts.py", "example4"},
               {"noBlocks", "noTSlots", "mrIpAdr"},
               [](std::span<const std::string> a, const AppContext& ctx) {
                 return FlData(example4_odts(parse_int(a[1], "noNodes"), parse_int(a[2], "nodeId"),
                                             parse_int(a[3], "noBlocks"), parse_int(a[4], "noTSlots"), a[5], ctx));
               }});
  return r;
}

}  // namespace

const std::vector<AppInfo>& registry() {
  static const std::vector<AppInfo> kRegistry = make_registry();
  return kRegistry;
}

const AppInfo* find_app(std::string_view name) {
  for (const auto& app : registry()) {
    if (app.name == name) return &app;
    for (const auto& alias : app.aliases)
      if (alias == name) return &app;
  }
  return nullptr;
}

FlData run_app(std::span<const std::string> argv, const AppContext& ctx) {
  if (argv.empty()) throw Error(ErrorCode::kInvalidArgs, "empty argument vector");
  const AppInfo* app = find_app(argv[0]);
  if (!app) throw Error(ErrorCode::kInvalidArgs, "unknown app '" + argv[0] + "'");
  if (argv.size() != 3 + app->extra_args.size()) {
    std::string usage = app->name + " <noNodes> <nodeId>";
    for (const auto& a : app->extra_args) usage += " <" + a + ">";
    throw Error(ErrorCode::kInvalidArgs, "usage: " + usage);
  }
  return app->run(argv, ctx);
}

std::string format_data(const FlData& value) {
  if (value.is_absent()) return "null";
  if (value.is_scalar()) return format_double(value.scalar());
  std::string s = "[";
  for (std::size_t i = 0; i < value.list().size(); ++i) {
    if (i) s += ",";
    s += format_data(value.list()[i]);
  }
  return s + "]";
}

std::string result_line(int node_id, const FlData& value) {
  return "RESULT nodeId=" + std::to_string(node_id) + " value=" + format_data(value);
}

}  // namespace flamesh::apps
