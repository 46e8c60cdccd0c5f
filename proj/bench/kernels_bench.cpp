#include <benchmark/benchmark.h>

#include <vector>

#include "dfa/kernels.hpp"
#include "dfa/prng.hpp"

namespace {

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  dfa::Prng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Reference)
      dfa::kernels::reference::gemm(dfa::kernels::Op::none, dfa::kernels::Op::none, n, n, n,
                                    a.data(), n, b.data(), n, c.data(), n);
    else
      dfa::kernels::gemm(dfa::kernels::Op::none, dfa::kernels::Op::none, n, n, n, a.data(), n,
                         b.data(), n, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <bool Reference>
void BM_Im2col(benchmark::State& state) {
  dfa::kernels::ConvGeometry g{32, 32, 32, 3, 3, 1, 1};
  const std::size_t batch = 16;
  const auto images = random_vector(batch * g.image_size(), 3);
  std::vector<float> cols(g.patch_size() * batch * g.out_pixels());
  for (auto _ : state) {
    if constexpr (Reference)
      dfa::kernels::reference::im2col(images.data(), batch, g, cols.data());
    else
      dfa::kernels::im2col(images.data(), batch, g, cols.data());
    benchmark::DoNotOptimize(cols.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Arg(128)->Arg(512);
BENCHMARK(BM_Im2col<false>)->Name("im2col/parallel");
BENCHMARK(BM_Im2col<true>)->Name("im2col/reference");

BENCHMARK_MAIN();
