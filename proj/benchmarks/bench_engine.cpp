#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "radial/elbo.hpp"
#include "radial/layers.hpp"
#include "radial/rng.hpp"
#include "radial/snapshot.hpp"
#include "radial/tensor.hpp"

namespace {

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  radial::Rng rng(4);
  radial::Tensor a = radial::gaussian(rng, {32, n});
  const radial::Tensor g = radial::gaussian(rng, {n, n});
  radial::Tensor w = radial::Tensor::from_vector({g.data().begin(), g.data().end()}, {n, n}, true);
  for (auto _ : state) {
    w.zero_grad();
    radial::sum(radial::relu(radial::matmul(a, w))).backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(200);

void BM_ElboStep(benchmark::State& state) {
  const auto family = static_cast<radial::Family>(state.range(0));
  radial::Rng init(5), rng(6), data(7);
  const radial::Architecture arch{2, {100, 100}, 2, 1, radial::HeadMode::single};
  radial::VariationalNetwork net(arch, radial::PosteriorFamily{family}, -3.0, init);
  const radial::Prior prior = radial::unit_prior(net);
  const radial::Tensor x = radial::gaussian(data, {32, 2});
  std::vector<std::size_t> y(32);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 2;
  const radial::ElboOptions opt{1, 512, false, radial::KlScaling::batch_fraction};
  for (auto _ : state) {
    net.zero_grad();
    radial::elbo_loss(net, x, y, prior, 0, opt, rng).loss.backward();
  }
  state.SetLabel(std::string(radial::to_string(family)));
}
BENCHMARK(BM_ElboStep)
    ->Arg(static_cast<int>(radial::Family::mfvi))
    ->Arg(static_cast<int>(radial::Family::radial));

}  // namespace
