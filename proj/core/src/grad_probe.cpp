#include "radial/grad_probe.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "radial/elbo.hpp"

namespace radial {

namespace {

struct Spread {
  double std = 0.0;
  double variance = 0.0;
};

// Column-wise spread of a [draws x params] table, averaged over columns.
Spread column_spread(const std::vector<std::vector<double>>& draws) {
  const std::size_t k = draws.size();
  const std::size_t p = draws.front().size();
  Spread s;
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (const auto& d : draws) mean += d[j];
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (const auto& d : draws) ss += (d[j] - mean) * (d[j] - mean);
    const double var = ss / static_cast<double>(k - 1);
    s.variance += var;
    s.std += std::sqrt(var);
  }
  s.variance /= static_cast<double>(p);
  s.std /= static_cast<double>(p);
  return s;
}

std::vector<double> single_sample_gradient(const VariationalNetwork& net, const Tensor& x,
                                           std::span<const std::size_t> labels, std::size_t head,
                                           std::span<const Tensor> watched, Rng& rng) {
  // Clears every active parameter so the probe leaves no gradient behind.
  std::vector<Tensor> touched = net.parameters(head);
  for (auto& t : touched) t.zero_grad();
  const ForwardResult fwd = net.forward(x, 1, rng, head);
  nll_classification(fwd.logits, labels).backward();
  std::vector<double> g;
  for (const auto& t : watched) {
    const auto view = t.grad_view();
    if (view.empty())
      g.insert(g.end(), t.numel(), 0.0);
    else
      g.insert(g.end(), view.begin(), view.end());
  }
  for (auto& t : touched) t.zero_grad();
  return g;
}

}  // namespace

GradVarianceRow grad_variance_probe(const VariationalNetwork& net, std::size_t layer,
                                    double sigma, std::size_t n_seeds, PosteriorFamily family,
                                    const Tensor& x, std::span<const std::size_t> labels,
                                    const Rng& rng) {
  if (n_seeds < 2) throw std::invalid_argument("grad_variance_probe: need at least 2 seeds");
  if (layer >= net.trunk().size())
    throw std::out_of_range("grad_variance_probe: trunk layer " + std::to_string(layer) +
                            " out of range");
  VariationalNetwork probe = net;
  probe.set_family(family);
  probe.set_sigma(sigma);
  const VariationalLayer& target = probe.trunk()[layer];
  const std::vector<Tensor> watched = target.mean_parameters();

  std::vector<std::vector<double>> draws;
  draws.reserve(n_seeds);
  for (std::size_t s = 0; s < n_seeds; ++s) {
    Rng seed_rng = rng.split(s);
    draws.push_back(single_sample_gradient(probe, x, labels, 0, watched, seed_rng));
  }
  const Spread spread = column_spread(draws);
  return {sigma, spread.std, spread.variance, n_seeds, target.num_params()};
}

GradVarianceReport grad_variance_sweep(const VariationalNetwork& net, std::size_t layer,
                                       std::span<const double> sigma_grid, std::size_t n_seeds,
                                       PosteriorFamily family, const Tensor& x,
                                       std::span<const std::size_t> labels, const Rng& rng) {
  if (sigma_grid.empty()) throw std::invalid_argument("grad_variance_sweep: empty sigma grid");
  for (std::size_t i = 1; i < sigma_grid.size(); ++i)
    if (!(sigma_grid[i] > sigma_grid[i - 1]))
      throw std::invalid_argument("grad_variance_sweep: sigma grid must be strictly increasing");
  GradVarianceReport report;
  report.sigma_grid.assign(sigma_grid.begin(), sigma_grid.end());
  report.n_seeds = n_seeds;
  report.family = family.kind;
  for (double sigma : sigma_grid) {
    // Same noise seeds at every sigma, so rows differ only through sigma.
    report.rows.push_back(grad_variance_probe(net, layer, sigma, n_seeds, family, x, labels, rng));
  }
  report.d = report.rows.front().d;
  report.protocol = "one weight draw per seed; gradient of batch-mean softmax NLL w.r.t. the means "
                    "of trunk layer " + std::to_string(layer) + "; batch " +
                    std::to_string(labels.size()) + "; per-parameter std across seeds, averaged";
  return report;
}

double nll_gradient_std(const VariationalNetwork& net, const Tensor& x,
                        std::span<const std::size_t> labels, std::size_t head, std::size_t k,
                        Rng& rng) {
  if (k < 2) throw std::invalid_argument("nll_gradient_std: need k >= 2 draws");
  const std::vector<Tensor> watched = net.mean_parameters(head);
  std::vector<std::vector<double>> draws;
  for (std::size_t i = 0; i < k; ++i)
    draws.push_back(single_sample_gradient(net, x, labels, head, watched, rng));
  return column_spread(draws).std;
}

}  // namespace radial
