#include "radial/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace radial {

void fill_mfvi_noise(Rng& rng, std::span<double> out) {
  for (double& v : out) v = rng.normal();
}

void fill_radial_noise(Rng& rng, std::span<double> out) {
  auto draw_direction = [&] {
    double sq = 0.0;
    for (double& v : out) {
      v = rng.normal();
      sq += v * v;
    }
    return std::sqrt(sq);
  };
  double length = draw_direction();
  if (length == 0.0) length = draw_direction();
  if (length == 0.0)
    throw std::runtime_error("sample_radial_noise: zero-length direction twice; degenerate rng");
  const double radius = std::abs(rng.normal());
  const double factor = radius / length;
  for (double& v : out) v *= factor;
}

std::size_t fill_truncated_noise(Rng& rng, std::span<double> out, double threshold) {
  if (!(threshold > 0.0))
    throw std::invalid_argument("sample_truncated_gaussian: threshold must be positive, got " +
                                std::to_string(threshold));
  std::size_t proposals = 0;
  for (double& v : out) {
    do {
      v = rng.normal();
      ++proposals;
    } while (std::abs(v) > threshold);
  }
  return proposals;
}

Tensor sample_mfvi_noise(Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  fill_mfvi_noise(rng, v);
  return Tensor::from_vector(std::move(v), {d});
}

Tensor sample_radial_noise(Rng& rng, std::size_t d) {
  if (d == 0) throw std::invalid_argument("sample_radial_noise: dimension must be >= 1");
  std::vector<double> v(d);
  fill_radial_noise(rng, v);
  return Tensor::from_vector(std::move(v), {d});
}

TruncatedNoise sample_truncated_gaussian(Rng& rng, std::size_t d, double threshold) {
  std::vector<double> v(d);
  const std::size_t proposals = fill_truncated_noise(rng, v, threshold);
  return {Tensor::from_vector(std::move(v), {d}), proposals};
}

double log_unit_sphere_area(std::size_t d) {
  const double h = 0.5 * static_cast<double>(d);
  return std::log(2.0) + h * std::log(std::numbers::pi) - std::lgamma(h);
}

double log_radius_pdf(double r, std::size_t d, double sigma) {
  if (d == 0 || !(sigma > 0.0) || r < 0.0)
    throw std::invalid_argument("radius_pdf: need r >= 0, sigma > 0, d >= 1");
  const double dd = static_cast<double>(d);
  if (r == 0.0 && d > 1) return -std::numeric_limits<double>::infinity();
  const double log_r_term = d > 1 ? (dd - 1.0) * std::log(r) : 0.0;
  return log_unit_sphere_area(d) - 0.5 * dd * std::log(2.0 * std::numbers::pi * sigma * sigma) +
         log_r_term - r * r / (2.0 * sigma * sigma);
}

double radius_pdf(double r, std::size_t d, double sigma) {
  return std::exp(log_radius_pdf(r, d, sigma));
}

double radius_mode(std::size_t d, double sigma) {
  if (d == 0 || !(sigma > 0.0))
    throw std::invalid_argument("radius_mode: need sigma > 0, d >= 1");
  return sigma * std::sqrt(static_cast<double>(d - 1));
}

double mean_pairwise_distance(std::span<const std::vector<double>> samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("mean_pairwise_distance: need at least two samples");
  const std::size_t d = samples[0].size();
  for (const auto& s : samples)
    if (s.size() != d) throw ShapeError("mean_pairwise_distance: samples differ in dimension");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = samples[i][k] - samples[j][k];
        sq += diff * diff;
      }
      total += std::sqrt(sq);
    }
  const double pairs = 0.5 * static_cast<double>(samples.size()) *
                       static_cast<double>(samples.size() - 1);
  return total / pairs;
}

}  // namespace radial
