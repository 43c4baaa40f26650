#include <benchmark/benchmark.h>

#include <random>

#include "marginfilter/kernels.hpp"

using namespace marginfilter;

namespace {

Matrix random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = g(rng);
  return m;
}

constexpr int kParallel = 0;
constexpr int kReference = 1;

void BM_convolve(benchmark::State& state) {
  const Matrix x = random(static_cast<std::size_t>(state.range(1)), 16, 1);
  const Matrix c = random(11, 16, 2);
  for (auto _ : state) {
    Matrix out = state.range(0) == kParallel ? kernels::convolve_channels(x, c, 6)
                                             : kernels::reference::convolve_channels(x, c, 6);
    benchmark::DoNotOptimize(out.values().data());
  }
}

void BM_gram(benchmark::State& state) {
  const Matrix a = random(static_cast<std::size_t>(state.range(1)), 8, 3);
  for (auto _ : state) {
    Matrix k = state.range(0) == kParallel ? kernels::gaussian_gram(a, a, 1.0)
                                           : kernels::reference::gaussian_gram(a, a, 1.0);
    benchmark::DoNotOptimize(k.values().data());
  }
}

void BM_expansion(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const Matrix q = random(n, 8, 4), c = random(n / 4, 8, 5);
  const std::vector<double> coef(n / 4, 0.5);
  for (auto _ : state) {
    auto out = state.range(0) == kParallel ? kernels::kernel_expansion(q, c, coef, 1.0, 0.1)
                                           : kernels::reference::kernel_expansion(q, c, coef, 1.0, 0.1);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_gradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(1));
  const Matrix x = random(n, 4, 6);
  const Matrix filtered = kernels::convolve_channels(x, random(11, 4, 7), 6);
  std::vector<std::size_t> rows;
  std::vector<double> coef;
  for (std::size_t i = 0; i < n; i += 2) {
    rows.push_back(i);
    coef.push_back(i % 4 == 0 ? 0.01 : -0.01);
  }
  for (auto _ : state) {
    Matrix g = state.range(0) == kParallel ? kernels::filter_gradient(x, filtered, rows, coef, 11, 6, 1.0)
                                           : kernels::reference::filter_gradient(x, filtered, rows, coef, 11, 6, 1.0);
    benchmark::DoNotOptimize(g.values().data());
  }
}

void args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"reference", "n"});
  for (int impl : {kParallel, kReference})
    for (int n : {250, 1000}) b->Args({impl, n});
  b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_convolve)->Apply(args);
BENCHMARK(BM_gram)->Apply(args);
BENCHMARK(BM_expansion)->Apply(args);
BENCHMARK(BM_gradient)->Apply(args);

BENCHMARK_MAIN();
