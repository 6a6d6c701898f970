// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to vary the
// thread count.

#include <benchmark/benchmark.h>

#include "wsp/kernels.hpp"
#include "wsp/random.hpp"

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  wsp::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <auto Kernel>
void BM_cosine_matrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 768;
  const auto x = random_floats(n * d, 1), y = random_floats(n * d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(x, n, y, n, d));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <bool Parallel>
void BM_linear_forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t in = 256, out = 1024;
  const auto x = random_floats(n * in, 3), w = random_floats(in * out, 4), b = random_floats(out, 5);
  std::vector<float> y(n * out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      wsp::kernels::par::linear_forward(x.data(), w.data(), b.data(), y.data(), n, in, out);
    } else {
      wsp::kernels::ref::linear_forward(x.data(), w.data(), b.data(), y.data(), n, in, out);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * in * out));
}

}  // namespace

BENCHMARK(BM_cosine_matrix<wsp::kernels::ref::cosine_matrix>)->Name("cosine_matrix/ref")->Arg(64)->Arg(256);
BENCHMARK(BM_cosine_matrix<wsp::kernels::par::cosine_matrix>)->Name("cosine_matrix/par")->Arg(64)->Arg(256);
BENCHMARK(BM_linear_forward<false>)->Name("linear_forward/ref")->Arg(64)->Arg(256);
BENCHMARK(BM_linear_forward<true>)->Name("linear_forward/par")->Arg(64)->Arg(256);

BENCHMARK_MAIN();
