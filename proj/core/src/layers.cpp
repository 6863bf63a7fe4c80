#include "radial/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "radial/noise.hpp"

namespace radial {

namespace {

Tensor deep_copy(const Tensor& t) {
  return Tensor::from_vector({t.data().begin(), t.data().end()}, t.shape(), t.requires_grad());
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::mfvi:
      return "mfvi";
    case Family::radial:
      return "radial";
    case Family::truncated_mfvi:
      return "truncated_mfvi";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "mfvi") return Family::mfvi;
  if (name == "radial") return Family::radial;
  if (name == "truncated_mfvi" || name == "truncated") return Family::truncated_mfvi;
  throw std::invalid_argument("unknown posterior family '" + std::string(name) + "'");
}

std::string_view to_string(HeadMode mode) { return mode == HeadMode::single ? "single" : "multi"; }

HeadMode parse_head_mode(std::string_view name) {
  if (name == "single") return HeadMode::single;
  if (name == "multi") return HeadMode::multi;
  throw std::invalid_argument("unknown head mode '" + std::string(name) + "'");
}

Tensor sigma_from_rho(const Tensor& rho) { return softplus(rho); }

double rho_from_sigma(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rho_from_sigma: sigma must be positive");
  // log(e^sigma - 1), written to stay finite for both tiny and large sigma.
  return sigma > 30.0 ? sigma + std::log1p(-std::exp(-sigma)) : std::log(std::expm1(sigma));
}

// ---- VariationalLayer --------------------------------------------------------

VariationalLayer::VariationalLayer(std::size_t in_features, std::size_t out_features,
                                   PosteriorFamily family, double rho_init, Rng& init)
    : in_(in_features), out_(out_features), family_(family) {
  if (in_ == 0 || out_ == 0) throw std::invalid_argument("VariationalLayer: empty layer");
  // He initialization for the means.
  const double scale = std::sqrt(2.0 / static_cast<double>(in_));
  std::vector<double> w(out_ * in_);
  for (double& v : w) v = scale * init.normal();
  w_mu_ = Tensor::from_vector(std::move(w), {out_, in_}, true);
  w_rho_ = Tensor::full({out_, in_}, rho_init, true);
  b_mu_ = Tensor::zeros({out_}, true);
  b_rho_ = Tensor::full({out_}, rho_init, true);
}

VariationalLayer::VariationalLayer(const VariationalLayer& other)
    : in_(other.in_),
      out_(other.out_),
      family_(other.family_),
      w_mu_(deep_copy(other.w_mu_)),
      w_rho_(deep_copy(other.w_rho_)),
      b_mu_(deep_copy(other.b_mu_)),
      b_rho_(deep_copy(other.b_rho_)) {}

VariationalLayer& VariationalLayer::operator=(const VariationalLayer& other) {
  if (this != &other) {
    VariationalLayer copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void VariationalLayer::set_sigma(double sigma) {
  const double rho = rho_from_sigma(sigma);
  for (Tensor* t : {&w_rho_, &b_rho_})
    for (double& v : t->mutable_data()) v = rho;
}

LayerNoise draw_noise(const VariationalLayer& layer, Rng& rng) {
  LayerNoise noise{std::vector<double>(layer.num_params())};
  switch (layer.family().kind) {
    case Family::mfvi:
      fill_mfvi_noise(rng, noise.values);
      break;
    case Family::radial:
      fill_radial_noise(rng, noise.values);
      break;
    case Family::truncated_mfvi:
      fill_truncated_noise(rng, noise.values, layer.family().truncation);
      break;
  }
  return noise;
}

SampledLayer apply_noise(const VariationalLayer& layer, const LayerNoise& noise) {
  const std::size_t nw = layer.out_features() * layer.in_features();
  if (noise.values.size() != layer.num_params())
    throw ShapeError("apply_noise: noise has " + std::to_string(noise.values.size()) +
                     " entries, layer has " + std::to_string(layer.num_params()) + " parameters");
  Tensor w_eps = Tensor::from_vector(
      {noise.values.begin(), noise.values.begin() + static_cast<std::ptrdiff_t>(nw)},
      layer.weight_mu().shape());
  Tensor b_eps = Tensor::from_vector(
      {noise.values.begin() + static_cast<std::ptrdiff_t>(nw), noise.values.end()},
      layer.bias_mu().shape());
  return {layer.weight_mu() + sigma_from_rho(layer.weight_rho()) * w_eps,
          layer.bias_mu() + sigma_from_rho(layer.bias_rho()) * b_eps};
}

SampledLayer sample_weights(const VariationalLayer& layer, Rng& rng) {
  return apply_noise(layer, draw_noise(layer, rng));
}

// ---- VariationalNetwork --------------------------------------------------------

VariationalNetwork::VariationalNetwork(Architecture arch, PosteriorFamily family,
                                       double rho_init, Rng& init)
    : arch_(std::move(arch)), family_(family) {
  if (arch_.input_dim == 0 || arch_.output_dim == 0)
    throw std::invalid_argument("VariationalNetwork: input and output dimensions must be positive");
  if (arch_.heads == 0) throw std::invalid_argument("VariationalNetwork: need at least one head");
  if (arch_.head_mode == HeadMode::single && arch_.heads != 1)
    throw std::invalid_argument("VariationalNetwork: single head mode with " +
                                std::to_string(arch_.heads) + " heads");
  std::size_t width = arch_.input_dim;
  for (std::size_t h : arch_.hidden) {
    trunk_.emplace_back(width, h, family_, rho_init, init);
    width = h;
  }
  for (std::size_t i = 0; i < arch_.heads; ++i)
    heads_.emplace_back(width, arch_.output_dim, family_, rho_init, init);
}

void VariationalNetwork::set_family(PosteriorFamily family) {
  family_ = family;
  for (auto& l : trunk_) l.set_family(family);
  for (auto& l : heads_) l.set_family(family);
}

void VariationalNetwork::check_head(std::size_t head) const {
  if (head >= heads_.size())
    throw std::out_of_range("VariationalNetwork: head " + std::to_string(head) +
                            " out of range (" + std::to_string(heads_.size()) + " heads)");
}

void VariationalNetwork::check_input(const Tensor& x) const {
  if (x.dim() != 2 || x.size(1) != arch_.input_dim)
    throw ShapeError("VariationalNetwork: input shape " + shape_to_string(x.shape()) +
                     " does not match input_dim " + std::to_string(arch_.input_dim));
}

std::vector<const VariationalLayer*> VariationalNetwork::active_layers(std::size_t head) const {
  check_head(head);
  std::vector<const VariationalLayer*> layers;
  for (const auto& l : trunk_) layers.push_back(&l);
  layers.push_back(&heads_[head]);
  return layers;
}

std::vector<Tensor> VariationalNetwork::parameters(std::size_t head) const {
  std::vector<Tensor> out;
  for (const auto* l : active_layers(head))
    for (auto& t : l->parameters()) out.push_back(t);
  return out;
}

std::vector<Tensor> VariationalNetwork::mean_parameters(std::size_t head) const {
  std::vector<Tensor> out;
  for (const auto* l : active_layers(head))
    for (auto& t : l->mean_parameters()) out.push_back(t);
  return out;
}

std::vector<Tensor> VariationalNetwork::all_parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : trunk_)
    for (auto& t : l.parameters()) out.push_back(t);
  for (const auto& l : heads_)
    for (auto& t : l.parameters()) out.push_back(t);
  return out;
}

std::size_t VariationalNetwork::num_params(std::size_t head) const {
  std::size_t n = 0;
  for (const auto* l : active_layers(head)) n += l->num_params();
  return n;
}

void VariationalNetwork::set_sigma(double sigma) {
  for (auto& l : trunk_) l.set_sigma(sigma);
  for (auto& l : heads_) l.set_sigma(sigma);
}

void VariationalNetwork::zero_grad() {
  for (auto& t : all_parameters()) t.zero_grad();
}

NetworkNoise VariationalNetwork::draw_noise(Rng& rng, std::size_t head) const {
  NetworkNoise noise;
  for (const auto* l : active_layers(head)) noise.push_back(radial::draw_noise(*l, rng));
  return noise;
}

std::vector<SampledLayer> VariationalNetwork::apply_noise(const NetworkNoise& noise,
                                                          std::size_t head) const {
  const auto layers = active_layers(head);
  if (noise.size() != layers.size())
    throw ShapeError("apply_noise: noise for " + std::to_string(noise.size()) + " layers, network has " +
                     std::to_string(layers.size()) + " active layers");
  std::vector<SampledLayer> out;
  out.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i)
    out.push_back(radial::apply_noise(*layers[i], noise[i]));
  return out;
}

Tensor VariationalNetwork::forward_weights(const Tensor& x,
                                           std::span<const SampledLayer> weights) const {
  check_input(x);
  Tensor h = x;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    h = add_bias(matmul(h, transpose(weights[i].weight)), weights[i].bias);
    if (i + 1 < weights.size()) h = relu(h);
  }
  return h;
}

ForwardResult VariationalNetwork::forward(const Tensor& x, std::size_t n_samples, Rng& rng,
                                          std::size_t head) const {
  if (n_samples == 0) throw std::invalid_argument("forward: n_samples must be >= 1");
  std::vector<NetworkNoise> noise;
  noise.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) noise.push_back(draw_noise(rng, head));
  return forward_with_noise(x, noise, head);
}

ForwardResult VariationalNetwork::forward_with_noise(const Tensor& x,
                                                     std::span<const NetworkNoise> noise,
                                                     std::size_t head) const {
  if (noise.empty()) throw std::invalid_argument("forward: n_samples must be >= 1");
  check_input(x);
  ForwardResult result;
  std::vector<Tensor> logits;
  for (const auto& n : noise) {
    result.samples.push_back(apply_noise(n, head));
    logits.push_back(forward_weights(x, result.samples.back()));
  }
  result.logits = stack(logits);
  return result;
}

Tensor VariationalNetwork::forward_mean(const Tensor& x, std::size_t head) const {
  std::vector<SampledLayer> means;
  for (const auto* l : active_layers(head)) means.push_back({l->weight_mu(), l->bias_mu()});
  return forward_weights(x, means);
}

}  // namespace radial
