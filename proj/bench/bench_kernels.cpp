// Serial reference vs OpenMP kernels over a vocabulary-sized matrix.
//
//   ./rosprompt_bench --benchmark_filter=Matvec
//   OMP_NUM_THREADS=4 ./rosprompt_bench

#include <benchmark/benchmark.h>

#include <vector>

#include "rosprompt/kernels.hpp"
#include "rosprompt/rng.hpp"
#include "rosprompt/vocab_embed.hpp"

namespace {

using namespace rosprompt;

struct Data {
  std::size_t rows, cols;
  std::vector<float> m;
  std::vector<double> v, g, norms;
  kernels::MatrixView view() const { return {m, rows, cols}; }
};

Data make(std::size_t rows, std::size_t cols) {
  Data d{rows, cols, std::vector<float>(rows * cols), std::vector<double>(cols),
         std::vector<double>(rows), std::vector<double>(rows)};
  Rng rng(rows * 31 + cols, "bench");
  for (float& x : d.m) x = static_cast<float>(rng.normal());
  for (double& x : d.v) x = rng.normal();
  for (double& x : d.g) x = rng.normal();
  kernels::serial::row_norms(d.view(), d.norms);
  return d;
}

template <auto Kernel>
void BM_matvec(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::vector<double> out(d.rows);
  for (auto _ : state) {
    Kernel(d.view(), d.v, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.rows * d.cols));
}

template <auto Kernel>
void BM_matvec_transposed(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::vector<double> out(d.cols);
  for (auto _ : state) {
    Kernel(d.view(), d.g, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.rows * d.cols));
}

template <auto Kernel>
void BM_cosine(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::vector<float> out(d.rows);
  for (auto _ : state) {
    Kernel(d.view(), d.norms, d.v, 1.0, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.rows * d.cols));
}

void BM_top_k(benchmark::State& state) {
  const auto d = make(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::vector<std::string> surfaces;
  for (std::size_t i = 0; i < d.rows; ++i) surfaces.push_back("t" + std::to_string(i));
  const EmbeddingTable table(surfaces, d.m, d.cols);
  const auto anchor = table.row(0);
  for (auto _ : state) benchmark::DoNotOptimize(top_k_neighbors(table, anchor, 16));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({1 << 12, 64})->Args({1 << 15, 256})->Args({250000, 256})->Unit(benchmark::kMicrosecond);
}

BENCHMARK(BM_matvec<kernels::serial::matvec>)->Name("Matvec/serial")->Apply(shapes);
BENCHMARK(BM_matvec<kernels::parallel::matvec>)->Name("Matvec/parallel")->Apply(shapes);
BENCHMARK(BM_matvec_transposed<kernels::serial::matvec_transposed>)
    ->Name("MatvecT/serial")->Apply(shapes);
BENCHMARK(BM_matvec_transposed<kernels::parallel::matvec_transposed>)
    ->Name("MatvecT/parallel")->Apply(shapes);
BENCHMARK(BM_cosine<kernels::serial::cosine_rows>)->Name("Cosine/serial")->Apply(shapes);
BENCHMARK(BM_cosine<kernels::parallel::cosine_rows>)->Name("Cosine/parallel")->Apply(shapes);
BENCHMARK(BM_top_k)->Name("TopK")->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
