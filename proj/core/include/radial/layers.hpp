#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radial/rng.hpp"
#include "radial/tensor.hpp"

namespace radial {

enum class Family { mfvi, radial, truncated_mfvi };

/// Posterior family tag; `truncation` is the per-coordinate noise bound for
/// truncated_mfvi and ignored otherwise.
struct PosteriorFamily {
  Family kind = Family::mfvi;
  double truncation = std::numeric_limits<double>::infinity();

  static PosteriorFamily mfvi() { return {Family::mfvi}; }
  static PosteriorFamily radial() { return {Family::radial}; }
  static PosteriorFamily truncated(double threshold) {
    return {Family::truncated_mfvi, threshold};
  }

  friend bool operator==(const PosteriorFamily&, const PosteriorFamily&) = default;
};

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

/// sigma = log(1 + e^rho), stable for large |rho|.
Tensor sigma_from_rho(const Tensor& rho);
/// Inverse of softplus for sigma > 0.
double rho_from_sigma(double sigma);

/// Reparameterization noise for one layer, weights (row-major) then biases.
struct LayerNoise {
  std::vector<double> values;
};

struct SampledLayer {
  Tensor weight;  ///< [out x in]
  Tensor bias;    ///< [out]
};

/// Affine layer with a factorized (mu, rho) pair per weight and bias.
///
/// Copies are deep: a copied layer owns fresh parameter leaves.
class VariationalLayer {
 public:
  VariationalLayer(std::size_t in_features, std::size_t out_features, PosteriorFamily family,
                   double rho_init, Rng& init);

  VariationalLayer(const VariationalLayer& other);
  VariationalLayer& operator=(const VariationalLayer& other);
  VariationalLayer(VariationalLayer&&) noexcept = default;
  VariationalLayer& operator=(VariationalLayer&&) noexcept = default;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  /// Weights plus biases: the dimension of the layer's radial noise.
  std::size_t num_params() const { return out_ * in_ + out_; }
  const PosteriorFamily& family() const { return family_; }
  void set_family(PosteriorFamily family) { family_ = family; }

  const Tensor& weight_mu() const { return w_mu_; }
  const Tensor& weight_rho() const { return w_rho_; }
  const Tensor& bias_mu() const { return b_mu_; }
  const Tensor& bias_rho() const { return b_rho_; }
  Tensor& weight_mu() { return w_mu_; }
  Tensor& weight_rho() { return w_rho_; }
  Tensor& bias_mu() { return b_mu_; }
  Tensor& bias_rho() { return b_rho_; }

  /// {weight_mu, weight_rho, bias_mu, bias_rho}
  std::vector<Tensor> parameters() const { return {w_mu_, w_rho_, b_mu_, b_rho_}; }
  std::vector<Tensor> mean_parameters() const { return {w_mu_, b_mu_}; }

  /// Sets every rho so that sigma equals `sigma`.
  void set_sigma(double sigma);

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  PosteriorFamily family_;
  Tensor w_mu_, w_rho_, b_mu_, b_rho_;
};

/// Draws the layer's family-specific noise.
LayerNoise draw_noise(const VariationalLayer& layer, Rng& rng);
/// mu + sigma * noise, differentiable in (mu, rho).
SampledLayer apply_noise(const VariationalLayer& layer, const LayerNoise& noise);
SampledLayer sample_weights(const VariationalLayer& layer, Rng& rng);

enum class HeadMode { single, multi };

std::string_view to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view name);

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 0;
  std::size_t heads = 1;
  HeadMode head_mode = HeadMode::single;
};

using NetworkNoise = std::vector<LayerNoise>;

struct ForwardResult {
  Tensor logits;  ///< [samples x batch x outputs]
  std::vector<std::vector<SampledLayer>> samples;  ///< per sample, per active layer
};

/// Relu MLP trunk of variational layers followed by one or more output heads.
class VariationalNetwork {
 public:
  VariationalNetwork(Architecture arch, PosteriorFamily family, double rho_init, Rng& init);

  const Architecture& architecture() const { return arch_; }
  const PosteriorFamily& family() const { return family_; }
  void set_family(PosteriorFamily family);

  std::vector<VariationalLayer>& trunk() { return trunk_; }
  const std::vector<VariationalLayer>& trunk() const { return trunk_; }
  std::vector<VariationalLayer>& heads() { return heads_; }
  const std::vector<VariationalLayer>& heads() const { return heads_; }

  /// Trunk layers followed by the selected head.
  std::vector<const VariationalLayer*> active_layers(std::size_t head) const;
  std::vector<Tensor> parameters(std::size_t head) const;
  std::vector<Tensor> mean_parameters(std::size_t head) const;
  std::vector<Tensor> all_parameters() const;
  std::size_t num_params(std::size_t head) const;

  void set_sigma(double sigma);
  void zero_grad();

  NetworkNoise draw_noise(Rng& rng, std::size_t head) const;
  std::vector<SampledLayer> apply_noise(const NetworkNoise& noise, std::size_t head) const;

  /// Logits [batch x outputs] for concrete weights.
  Tensor forward_weights(const Tensor& x, std::span<const SampledLayer> weights) const;
  /// n_samples fresh weight draws, each shared across the batch.
  ForwardResult forward(const Tensor& x, std::size_t n_samples, Rng& rng,
                        std::size_t head = 0) const;
  ForwardResult forward_with_noise(const Tensor& x, std::span<const NetworkNoise> noise,
                                   std::size_t head = 0) const;
  /// Deterministic forward pass through the means.
  Tensor forward_mean(const Tensor& x, std::size_t head = 0) const;

  void check_head(std::size_t head) const;

 private:
  void check_input(const Tensor& x) const;

  Architecture arch_;
  PosteriorFamily family_;
  std::vector<VariationalLayer> trunk_;
  std::vector<VariationalLayer> heads_;
};

}  // namespace radial
