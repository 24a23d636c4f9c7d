#include <noiseid/consensus.hpp>
#include <noiseid/noisegen.hpp>

#include <benchmark/benchmark.h>

using namespace noiseid;

static void BM_EstimateExact(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const Scenario s(asymmetric_T(K, 0.3), Prior::uniform(K));
  const JointTensor joint = exact_joint(s, 3);
  for (auto _ : state) benchmark::DoNotOptimize(estimate(joint));
}
BENCHMARK(BM_EstimateExact)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);

static void BM_Witness(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(witness_p2(0.7, 0.2, 0.2, 0));
}
BENCHMARK(BM_Witness);

BENCHMARK_MAIN();
