#include <random>

#include <benchmark/benchmark.h>

#include "netchoice/graph.hpp"
#include "netchoice/kernels.hpp"

namespace {

using netchoice::AdjacencyGraph;
using netchoice::DenseMatrix;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

AdjacencyGraph random_graph(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit;
  DenseMatrix coords(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    coords(i, 0) = unit(rng);
    coords(i, 1) = unit(rng);
  }
  return netchoice::normalize(netchoice::build_knn_graph(coords, 8, true), netchoice::Normalization::row);
}

template <void (*Kernel)(const DenseMatrix&, const DenseMatrix&, DenseMatrix&)>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_matrix(n, 64, 1);
  const DenseMatrix b = random_matrix(64, 64, 2);
  DenseMatrix out(n, 64);
  for (auto _ : state) {
    Kernel(a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 64));
}

template <void (*Kernel)(const netchoice::CsrView&, const DenseMatrix&, DenseMatrix&)>
void bm_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const AdjacencyGraph g = random_graph(n);
  const DenseMatrix a = random_matrix(n, 32, 3);
  DenseMatrix out(n, 32);
  for (auto _ : state) {
    Kernel(g.csr(), a, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.nnz() * 32));
}

void bm_fixed_point(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const AdjacencyGraph g = random_graph(n);
  const DenseMatrix z = random_matrix(n, 1, 4);
  for (auto _ : state) {
    auto u = netchoice::affine_fixed_point(g, 0.6, z.data());
    benchmark::DoNotOptimize(u.data());
  }
}

}  // namespace

BENCHMARK(bm_gemm<netchoice::kernels::serial::gemm>)->Name("gemm/serial")->Arg(1024)->Arg(8192);
BENCHMARK(bm_gemm<netchoice::kernels::parallel::gemm>)->Name("gemm/parallel")->Arg(1024)->Arg(8192);
BENCHMARK(bm_spmm<netchoice::kernels::serial::spmm>)->Name("spmm/serial")->Arg(4096)->Arg(32768);
BENCHMARK(bm_spmm<netchoice::kernels::parallel::spmm>)->Name("spmm/parallel")->Arg(4096)->Arg(32768);
BENCHMARK(bm_fixed_point)->Name("affine_fixed_point")->Arg(4096)->Arg(32768);

BENCHMARK_MAIN();
