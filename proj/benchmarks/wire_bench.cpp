#include <benchmark/benchmark.h>

#include "flamesh/wire.hpp"

namespace {

using namespace flamesh;

Envelope model_envelope(std::size_t width) {
  FlData::List values;
  for (std::size_t i = 0; i < width; ++i) values.push_back(FlData(0.1 * static_cast<double>(i) + 1.0 / 3.0));
  return Envelope{DecMsg{7, 1, Endpoint{"192.168.2.4", 6000}, FlData(std::move(values))}};
}

void BM_Encode(benchmark::State& state) {
  auto env = model_envelope(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encode(env));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode)->Arg(1)->Arg(64)->Arg(4096);

void BM_Decode(benchmark::State& state) {
  auto bytes = encode(model_envelope(static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(decode(bytes));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(64)->Arg(4096);

void BM_FormatDouble(benchmark::State& state) {
  double v = 1.74951171875;
  for (auto _ : state) {
    benchmark::DoNotOptimize(format_double(v));
    v += 1e-3;
  }
}
BENCHMARK(BM_FormatDouble);

}  // namespace
