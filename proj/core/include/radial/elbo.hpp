#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "radial/layers.hpp"
#include "radial/snapshot.hpp"

namespace radial {

/// -sum_i log(sigma_i) over every tensor in `sigmas`. Rejects sigma <= 0.
Tensor entropy_term(std::span<const Tensor> sigmas);

/// Additive constant of E_q[log q] for d-dimensional radial noise: the full
/// term is -sum log sigma + entropy_constant(d). Closed-form radial pieces
/// plus tanh-sinh quadrature of the sine-power integrals; cached per d.
/// Throws std::runtime_error if a quadrature misses its tolerance.
double entropy_constant(std::size_t d);

/// The same constant for d-dimensional standard Gaussian noise, -d/2 (1 + log 2 pi).
double gaussian_entropy_constant(std::size_t d);

/// int_0^pi sin^m(t) log(sin^m(t)) dt by quadrature.
double sine_power_log_integral(std::size_t m);

/// sum_i (sigma_i^2 + mu_i^2) / 2: cross-entropy to N(0, I) without its
/// log-normalizer.
Tensor cross_entropy_unit_gaussian_analytic(const Tensor& mu, const Tensor& sigma);

/// sum_i (sigma_i^2 + (mu_i - mu_p,i)^2) / (2 sigma_p,i^2), plus
/// sum log sigma_p + D/2 log 2 pi when `include_constant`.
/// `offset` selects the slice of the prior arrays that `mu` covers.
Tensor cross_entropy_diagonal_analytic(const Tensor& mu, const Tensor& sigma,
                                       const DiagonalGaussianPrior& prior, std::size_t offset = 0,
                                       bool include_constant = true);

/// Exact KL between factorized Gaussians, summed over coordinates.
double kl_diagonal_gaussian(std::span<const double> mu, std::span<const double> sigma,
                            std::span<const double> prior_mu, std::span<const double> prior_sigma);

/// -(1/N) sum_n log p(w_n) under a Gaussian-family prior, each sample a flat
/// or shaped tensor with the prior's dimension. Radial priors are rejected.
Tensor cross_entropy_mc(const LayerPrior& prior, std::span<const Tensor> samples,
                        bool include_constant = true);

struct RadialCrossEntropy {
  Tensor value;
  /// The estimator omits a change-of-variables Jacobian term; consumers must
  /// surface this flag.
  bool missing_jacobian = true;
};

/// (1/N) sum_n ||(w_n - mu_p) / sigma_p||^2 / 2.
RadialCrossEntropy radial_prior_cross_entropy_mc(const RadialSnapshotPrior& prior,
                                                 std::span<const Tensor> samples);

/// Softmax NLL averaged over weight samples and batch. logits [S x B x K].
Tensor nll_classification(const Tensor& logits, std::span<const std::size_t> labels);

enum class KlScaling {
  /// Loss = batch NLL sum + (B / N) KL; summing over an epoch gives the
  /// negative ELBO.
  batch_fraction,
  /// Loss = mean NLL + KL / N, the same objective divided by N.
  per_example,
};

std::string_view to_string(KlScaling mode);
KlScaling parse_kl_scaling(std::string_view name);

struct ElboBreakdown {
  double nll = 0.0;  ///< sample-averaged NLL: batch sum, or batch mean for per_example
  double entropy_term = 0.0;        ///< E_q[log q]
  double cross_entropy_term = 0.0;  ///< E_q[log p]
  double kl = 0.0;
  double scale = 0.0;  ///< weight applied to kl in `total`
  double total = 0.0;  ///< nll + scale * kl
};

struct ElboOptions {
  std::size_t n_samples = 1;
  std::size_t dataset_size = 0;
  bool include_constants = false;
  KlScaling scaling = KlScaling::batch_fraction;
};

struct ElboResult {
  Tensor loss;  ///< differentiable total
  ElboBreakdown breakdown;
  Tensor logits;  ///< [S x B x K]
  bool radial_prior_caveat = false;
};

struct KlTerms {
  Tensor entropy;        ///< E_q[log q]
  Tensor cross_entropy;  ///< -E_q[log p]
  bool radial_prior_caveat = false;
};

/// KL pieces for the active layers of `head`. `samples` are the weight draws
/// for MC cross-entropy paths; ignored by analytic ones.
KlTerms kl_terms(const VariationalNetwork& net, const Prior& prior, std::size_t head,
                 std::span<const std::vector<SampledLayer>> samples, bool include_constants);

/// Full objective on one minibatch with fresh noise from `rng`.
ElboResult elbo_loss(const VariationalNetwork& net, const Tensor& x,
                     std::span<const std::size_t> labels, const Prior& prior, std::size_t head,
                     const ElboOptions& options, Rng& rng);

/// Same with caller-supplied noise, one NetworkNoise per sample.
ElboResult elbo_loss_with_noise(const VariationalNetwork& net, const Tensor& x,
                                std::span<const std::size_t> labels, const Prior& prior,
                                std::size_t head, const ElboOptions& options,
                                std::span<const NetworkNoise> noise);

}  // namespace radial
