#include "radial/elbo.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace radial {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

template <class P>
Tensor prior_slice(const P& prior, const std::vector<double>& values, std::size_t offset,
                   const Shape& shape, const char* op) {
  const std::size_t n = shape_numel(shape);
  if (offset + n > prior.mu.size())
    throw ShapeError(std::string(op) + ": prior has " + std::to_string(prior.mu.size()) +
                     " entries, need " + std::to_string(offset + n));
  return Tensor::from_vector({values.begin() + static_cast<std::ptrdiff_t>(offset),
                              values.begin() + static_cast<std::ptrdiff_t>(offset + n)},
                             shape);
}

double sum_log(const std::vector<double>& v, std::size_t offset, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = offset; i < offset + n; ++i) s += std::log(v[i]);
  return s;
}

// -log p(w) for one tensor-shaped block of a Gaussian-family prior.
Tensor gaussian_neg_log_density(const LayerPrior& prior, const Tensor& w, std::size_t offset,
                                bool include_constant) {
  const double n = static_cast<double>(w.numel());
  if (const auto* diag = std::get_if<DiagonalGaussianPrior>(&prior)) {
    Tensor mu = prior_slice(*diag, diag->mu, offset, w.shape(), "cross_entropy_mc");
    Tensor sigma = prior_slice(*diag, diag->sigma, offset, w.shape(), "cross_entropy_mc");
    Tensor value = 0.5 * sum(square((w - mu) / sigma));
    if (include_constant)
      value = add_scalar(value, 0.5 * n * kLog2Pi + sum_log(diag->sigma, offset, w.numel()));
    return value;
  }
  if (std::holds_alternative<RadialSnapshotPrior>(prior))
    throw std::invalid_argument(
        "cross_entropy_mc: radial snapshot prior; use radial_prior_cross_entropy_mc");
  Tensor value = 0.5 * sum(square(w));
  if (include_constant) value = add_scalar(value, 0.5 * n * kLog2Pi);
  return value;
}

Tensor radial_block(const RadialSnapshotPrior& prior, const Tensor& w, std::size_t offset) {
  Tensor mu = prior_slice(prior, prior.mu, offset, w.shape(), "radial_prior_cross_entropy_mc");
  Tensor sigma = prior_slice(prior, prior.sigma, offset, w.shape(), "radial_prior_cross_entropy_mc");
  return 0.5 * sum(square((w - mu) / sigma));
}

Tensor sum_all(const std::vector<Tensor>& parts) {
  Tensor total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = total + parts[i];
  return total;
}

}  // namespace

Tensor entropy_term(std::span<const Tensor> sigmas) {
  if (sigmas.empty()) return Tensor::scalar(0.0);
  std::vector<Tensor> parts;
  for (const auto& s : sigmas) {
    for (double v : s.data())
      if (!(v > 0.0))
        throw std::domain_error("entropy_term: sigma must be positive, got " + std::to_string(v));
    parts.push_back(-1.0 * sum(log(s)));
  }
  return sum_all(parts);
}

Tensor cross_entropy_unit_gaussian_analytic(const Tensor& mu, const Tensor& sigma) {
  return 0.5 * sum(square(sigma) + square(mu));
}

Tensor cross_entropy_diagonal_analytic(const Tensor& mu, const Tensor& sigma,
                                       const DiagonalGaussianPrior& prior, std::size_t offset,
                                       bool include_constant) {
  Tensor pm = prior_slice(prior, prior.mu, offset, mu.shape(), "cross_entropy_diagonal_analytic");
  std::vector<double> inv(mu.numel());
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const double s = prior.sigma[offset + i];
    inv[i] = 1.0 / (2.0 * s * s);
  }
  Tensor value = sum((square(sigma) + square(mu - pm)) * Tensor::from_vector(std::move(inv), mu.shape()));
  if (include_constant)
    value = add_scalar(value, 0.5 * static_cast<double>(mu.numel()) * kLog2Pi +
                                  sum_log(prior.sigma, offset, mu.numel()));
  return value;
}

double kl_diagonal_gaussian(std::span<const double> mu, std::span<const double> sigma,
                            std::span<const double> prior_mu, std::span<const double> prior_sigma) {
  if (mu.size() != sigma.size() || mu.size() != prior_mu.size() || mu.size() != prior_sigma.size())
    throw ShapeError("kl_diagonal_gaussian: argument lengths differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double ratio = sigma[i] / prior_sigma[i];
    const double diff = (mu[i] - prior_mu[i]) / prior_sigma[i];
    kl += 0.5 * (ratio * ratio + diff * diff - 1.0) - std::log(ratio);
  }
  return kl;
}

Tensor cross_entropy_mc(const LayerPrior& prior, std::span<const Tensor> samples,
                        bool include_constant) {
  if (samples.empty()) throw std::invalid_argument("cross_entropy_mc: need at least one sample");
  std::vector<Tensor> parts;
  for (const auto& w : samples) parts.push_back(gaussian_neg_log_density(prior, w, 0, include_constant));
  return sum_all(parts) * (1.0 / static_cast<double>(samples.size()));
}

RadialCrossEntropy radial_prior_cross_entropy_mc(const RadialSnapshotPrior& prior,
                                                 std::span<const Tensor> samples) {
  if (samples.empty())
    throw std::invalid_argument("radial_prior_cross_entropy_mc: need at least one sample");
  std::vector<Tensor> parts;
  for (const auto& w : samples) {
    if (w.numel() != prior.mu.size())
      throw ShapeError("radial_prior_cross_entropy_mc: sample " + shape_to_string(w.shape()) +
                       " vs prior of " + std::to_string(prior.mu.size()) + " entries");
    parts.push_back(radial_block(prior, w, 0));
  }
  return {sum_all(parts) * (1.0 / static_cast<double>(samples.size())), true};
}

Tensor nll_classification(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.dim() != 3)
    throw ShapeError("nll_classification: logits must be [samples x batch x classes], got " +
                     shape_to_string(logits.shape()));
  const std::size_t S = logits.size(0), B = logits.size(1), K = logits.size(2);
  if (S == 0 || B == 0) throw ShapeError("nll_classification: empty logits");
  if (labels.size() != B)
    throw ShapeError("nll_classification: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(B));
  std::vector<double> mask(S * B * K, 0.0);
  const double w = -1.0 / static_cast<double>(S * B);
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= K)
      throw std::out_of_range("nll_classification: label " + std::to_string(labels[b]) +
                              " out of range for " + std::to_string(K) + " classes");
    for (std::size_t s = 0; s < S; ++s) mask[(s * B + b) * K + labels[b]] = w;
  }
  return sum(log_softmax(logits) * Tensor::from_vector(std::move(mask), logits.shape()));
}

std::string_view to_string(KlScaling mode) {
  return mode == KlScaling::batch_fraction ? "batch_fraction" : "per_example";
}

KlScaling parse_kl_scaling(std::string_view name) {
  if (name == "batch_fraction") return KlScaling::batch_fraction;
  if (name == "per_example") return KlScaling::per_example;
  throw std::invalid_argument("unknown KL scaling mode '" + std::string(name) + "'");
}

KlTerms kl_terms(const VariationalNetwork& net, const Prior& prior, std::size_t head,
                 std::span<const std::vector<SampledLayer>> samples, bool include_constants) {
  const auto layers = net.active_layers(head);
  const auto priors = prior.active(head);
  if (priors.size() != layers.size())
    throw std::invalid_argument("kl_terms: prior has " + std::to_string(priors.size()) +
                                " active layers, network has " + std::to_string(layers.size()));

  KlTerms out;
  std::vector<Tensor> sigmas;
  std::vector<Tensor> cross;
  double entropy_offset = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const VariationalLayer& layer = *layers[i];
    const LayerPrior& lp = *priors[i];
    const std::size_t d = layer.num_params();
    const std::size_t nw = layer.out_features() * layer.in_features();
    if (prior_size(lp) != 0 && prior_size(lp) != d)
      throw std::invalid_argument("kl_terms: prior for layer " + std::to_string(i) + " has " +
                                  std::to_string(prior_size(lp)) + " entries, layer has " +
                                  std::to_string(d));
    Tensor w_sigma = sigma_from_rho(layer.weight_rho());
    Tensor b_sigma = sigma_from_rho(layer.bias_rho());
    sigmas.push_back(w_sigma);
    sigmas.push_back(b_sigma);
    const bool radial_family = layer.family().kind == Family::radial;
    if (include_constants)
      entropy_offset += radial_family ? entropy_constant(d) : gaussian_entropy_constant(d);

    auto mc_over_samples = [&](auto&& block) {
      if (samples.empty())
        throw std::invalid_argument("kl_terms: Monte Carlo cross-entropy needs weight samples");
      std::vector<Tensor> parts;
      for (const auto& s : samples) {
        if (s.size() != layers.size()) throw ShapeError("kl_terms: sample has wrong layer count");
        parts.push_back(block(s[i].weight, 0) + block(s[i].bias, nw));
      }
      return sum_all(parts) * (1.0 / static_cast<double>(samples.size()));
    };

    if (const auto* rp = std::get_if<RadialSnapshotPrior>(&lp)) {
      out.radial_prior_caveat = true;
      cross.push_back(mc_over_samples(
          [&](const Tensor& w, std::size_t off) { return radial_block(*rp, w, off); }));
    } else if (radial_family) {
      cross.push_back(mc_over_samples([&](const Tensor& w, std::size_t off) {
        return gaussian_neg_log_density(lp, w, off, include_constants);
      }));
    } else if (const auto* dp = std::get_if<DiagonalGaussianPrior>(&lp)) {
      cross.push_back(
          cross_entropy_diagonal_analytic(layer.weight_mu(), w_sigma, *dp, 0, include_constants) +
          cross_entropy_diagonal_analytic(layer.bias_mu(), b_sigma, *dp, nw, include_constants));
    } else {
      Tensor h = cross_entropy_unit_gaussian_analytic(layer.weight_mu(), w_sigma) +
                 cross_entropy_unit_gaussian_analytic(layer.bias_mu(), b_sigma);
      if (include_constants) h = add_scalar(h, 0.5 * static_cast<double>(d) * kLog2Pi);
      cross.push_back(h);
    }
  }
  out.entropy = entropy_term(sigmas);
  if (include_constants) out.entropy = add_scalar(out.entropy, entropy_offset);
  out.cross_entropy = sum_all(cross);
  return out;
}

ElboResult elbo_loss(const VariationalNetwork& net, const Tensor& x,
                     std::span<const std::size_t> labels, const Prior& prior, std::size_t head,
                     const ElboOptions& options, Rng& rng) {
  if (options.n_samples == 0) throw std::invalid_argument("elbo_loss: n_samples must be >= 1");
  std::vector<NetworkNoise> noise;
  noise.reserve(options.n_samples);
  for (std::size_t s = 0; s < options.n_samples; ++s) noise.push_back(net.draw_noise(rng, head));
  return elbo_loss_with_noise(net, x, labels, prior, head, options, noise);
}

ElboResult elbo_loss_with_noise(const VariationalNetwork& net, const Tensor& x,
                                std::span<const std::size_t> labels, const Prior& prior,
                                std::size_t head, const ElboOptions& options,
                                std::span<const NetworkNoise> noise) {
  const std::size_t batch = labels.size();
  if (options.dataset_size < batch || batch == 0)
    throw std::invalid_argument("elbo_loss: dataset_size " + std::to_string(options.dataset_size) +
                                " smaller than batch " + std::to_string(batch));
  ForwardResult fwd = net.forward_with_noise(x, noise, head);
  Tensor nll_mean = nll_classification(fwd.logits, labels);
  KlTerms kt = kl_terms(net, prior, head, fwd.samples, options.include_constants);
  Tensor kl = kt.entropy + kt.cross_entropy;

  const double b = static_cast<double>(batch);
  const double n = static_cast<double>(options.dataset_size);
  Tensor nll_part = nll_mean;
  double scale = 1.0 / n;
  if (options.scaling == KlScaling::batch_fraction) {
    nll_part = nll_mean * b;
    scale = b / n;
  }

  ElboResult result;
  result.loss = nll_part + kl * scale;
  result.logits = fwd.logits;
  result.radial_prior_caveat = kt.radial_prior_caveat;
  auto& br = result.breakdown;
  br.nll = nll_part.item();
  br.entropy_term = kt.entropy.item();
  br.cross_entropy_term = -kt.cross_entropy.item();
  br.kl = br.entropy_term - br.cross_entropy_term;
  br.scale = scale;
  br.total = result.loss.item();
  return result;
}

}  // namespace radial
