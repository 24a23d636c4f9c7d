#include <noiseid/consensus.hpp>
#include <noiseid/noisegen.hpp>

#include <benchmark/benchmark.h>

using namespace noiseid;

static void BM_SampleIid(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto T = asymmetric_T(5, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(sample_iid_noisy(Prior::uniform(5), T, 3, n, 7));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SampleIid)->Range(1 << 12, 1 << 20)->Unit(benchmark::kMillisecond);

static void BM_EmpiricalJoint(benchmark::State& state) {
  const auto ds = sample_iid_noisy(Prior::uniform(5), asymmetric_T(5, 0.3), 3,
                                   static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_joint(ds));
}
BENCHMARK(BM_EmpiricalJoint)->Range(1 << 12, 1 << 20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
