#include <noiseid/matrices.hpp>
#include <noiseid/random.hpp>

#include <benchmark/benchmark.h>

using namespace noiseid;

static Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.0, 1.0);
  return m;
}

static void BM_KruskalRank(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const Matrix m = random_matrix(K, K, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kruskal_rank(m));
}
BENCHMARK(BM_KruskalRank)->DenseRange(4, 12, 2);

static void BM_AlignPermutation(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const Matrix a = random_matrix(K, K, 2);
  const Matrix b = random_matrix(K, K, 3);
  for (auto _ : state) benchmark::DoNotOptimize(align_permutation(a, b));
}
BENCHMARK(BM_AlignPermutation)->DenseRange(3, 9, 2);

BENCHMARK_MAIN();
