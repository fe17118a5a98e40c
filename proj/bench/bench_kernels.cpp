#include <benchmark/benchmark.h>

#include "mvi/graph.hpp"
#include "mvi/kernels.hpp"
#include "mvi/rng.hpp"

using namespace mvi;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t tag) {
  RngStream rng(tag, streams::kData);
  return gaussian(rng, 0.0, 1.0, r, c);
}

// Batch of 200 samples x 64 features times a 64 x 64 weight.
template <Matrix (*Gemm)(const Matrix&, const Matrix&)>
void BM_GemmNN(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(rows, 64, 1);
  const Matrix b = random_matrix(64, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64 * 64));
}

// eta^T (f - y): the operator reduction.
template <Matrix (*Gemm)(const Matrix&, const Matrix&)>
void BM_GemmTN(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(rows, 64, 3);
  const Matrix b = random_matrix(rows, 32, 4);
  for (auto _ : state) benchmark::DoNotOptimize(Gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64 * 32));
}

template <Matrix (*Block)(const Matrix&, const Matrix&, std::size_t)>
void BM_GraphFilter(benchmark::State& state) {
  const auto samples = static_cast<std::size_t>(state.range(0));
  const std::size_t n = 40;
  RngStream grng(0, streams::kGraph);
  const Matrix f = gcn_operator(erdos_renyi(n, 0.15, grng));
  const Matrix x = random_matrix(samples * n, 16, 5);
  for (auto _ : state) benchmark::DoNotOptimize(Block(f, x, n));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples * n * n * 16));
}

}  // namespace

BENCHMARK(BM_GemmNN<kernels::gemm_nn>)->Name("gemm_nn/omp")->Arg(200)->Arg(2000);
BENCHMARK(BM_GemmNN<kernels::reference::gemm_nn>)->Name("gemm_nn/serial")->Arg(200)->Arg(2000);
BENCHMARK(BM_GemmTN<kernels::gemm_tn>)->Name("gemm_tn/omp")->Arg(200)->Arg(2000);
BENCHMARK(BM_GemmTN<kernels::reference::gemm_tn>)->Name("gemm_tn/serial")->Arg(200)->Arg(2000);
BENCHMARK(BM_GraphFilter<kernels::block_left_multiply>)->Name("gcn_filter/omp")->Arg(100)->Arg(1000);
BENCHMARK(BM_GraphFilter<kernels::reference::block_left_multiply>)
    ->Name("gcn_filter/serial")
    ->Arg(100)
    ->Arg(1000);

BENCHMARK_MAIN();
