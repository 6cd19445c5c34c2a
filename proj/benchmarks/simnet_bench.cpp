#include <benchmark/benchmark.h>

#include "flamesh/apps.hpp"
#include "flamesh/simnet.hpp"

namespace {

using namespace flamesh;

// Whole Example 3 run (startup plus three decentralized iterations) on the
// simulator, n nodes.
void BM_SimExample3(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<NodeMain> mains;
  for (int i = 0; i < n; ++i)
    mains.push_back([](const NodeEnv& env) {
      apps::AppContext ctx{env.backend, {}, {}};
      return apps::example3_decent_avg(env.no_nodes, env.node_id, sim_ip(0), ctx);
    });
  SimConfig cfg;
  cfg.delay_max = std::chrono::milliseconds(50);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_nodes(mains, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_SimExample3)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
