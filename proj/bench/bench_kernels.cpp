// Parallel kernels against their serial reference twins.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dml/kernels.hpp"

namespace k = dml::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Batch x input width times input width x output width, as in a first layer.
template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t kk = 48, n = 128;
  const auto a = random_vector(m * kk, 1), b = random_vector(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::matmul(a, b, c, m, kk, n);
    else k::reference::matmul(a, b, c, m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * kk * n));
}

template <bool Parallel>
void BM_MatmulTN(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t m = 48, n = 128;
  const auto a = random_vector(rows * m, 3), b = random_vector(rows * n, 4);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) k::matmul_tn(a, b, c, m, rows, n);
    else k::reference::matmul_tn(a, b, c, m, rows, n);
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_RowSoftmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 64;
  const auto in = random_vector(rows * cols, 5);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    if constexpr (Parallel) k::row_softmax(in, out, rows, cols);
    else k::reference::row_softmax(in, out, rows, cols);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_GatherMean(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t vocab = 4000, dim = 8;
  const auto table = random_vector(vocab * dim, 6);
  std::mt19937_64 rng(7);
  std::vector<std::uint32_t> offsets = {0};
  std::vector<std::int32_t> indices;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t bag = 1 + rng() % 3;
    for (std::size_t i = 0; i < bag; ++i) indices.push_back(static_cast<std::int32_t>(rng() % vocab));
    offsets.push_back(static_cast<std::uint32_t>(indices.size()));
  }
  const k::BagView view{offsets, indices};
  std::vector<double> out(rows * dim);
  for (auto _ : state) {
    if constexpr (Parallel) k::gather_mean(table, dim, view, out);
    else k::reference::gather_mean(table, dim, view, out);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Arg(512)->Arg(4096);
BENCHMARK(BM_Matmul<true>)->Arg(512)->Arg(4096);
BENCHMARK(BM_MatmulTN<false>)->Arg(512)->Arg(4096);
BENCHMARK(BM_MatmulTN<true>)->Arg(512)->Arg(4096);
BENCHMARK(BM_RowSoftmax<false>)->Arg(512)->Arg(8192);
BENCHMARK(BM_RowSoftmax<true>)->Arg(512)->Arg(8192);
BENCHMARK(BM_GatherMean<false>)->Arg(512)->Arg(8192);
BENCHMARK(BM_GatherMean<true>)->Arg(512)->Arg(8192);

BENCHMARK_MAIN();
