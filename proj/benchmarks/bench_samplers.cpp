#include <benchmark/benchmark.h>

#include <vector>

#include "radial/noise.hpp"
#include "radial/rng.hpp"

namespace {

void BM_MfviNoise(benchmark::State& state) {
  radial::Rng rng(1);
  std::vector<double> buf(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    radial::fill_mfvi_noise(rng, buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MfviNoise)->Arg(100)->Arg(4608)->Arg(100000);

void BM_RadialNoise(benchmark::State& state) {
  radial::Rng rng(2);
  std::vector<double> buf(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    radial::fill_radial_noise(rng, buf);
    benchmark::DoNotOptimize(buf.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RadialNoise)->Arg(100)->Arg(4608)->Arg(100000);

void BM_TruncatedNoise(benchmark::State& state) {
  radial::Rng rng(3);
  std::vector<double> buf(4608);
  const double threshold = static_cast<double>(state.range(0)) / 10.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(radial::fill_truncated_noise(rng, buf, threshold));
  }
  state.SetItemsProcessed(state.iterations() * 4608);
}
BENCHMARK(BM_TruncatedNoise)->Arg(5)->Arg(10)->Arg(20);

}  // namespace
