#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "radial/rng.hpp"
#include "radial/tensor.hpp"

namespace radial {

/// d i.i.d. standard normals.
Tensor sample_mfvi_noise(Rng& rng, std::size_t d);

/// Uniform direction on the unit sphere times an independent half-normal radius.
Tensor sample_radial_noise(Rng& rng, std::size_t d);

struct TruncatedNoise {
  Tensor noise;
  std::size_t proposals = 0;  ///< normals drawn, accepted or not

  /// Fraction of per-coordinate proposals accepted.
  double acceptance_rate() const {
    return proposals == 0 ? 1.0
                          : static_cast<double>(noise.numel()) / static_cast<double>(proposals);
  }
};

/// Per-coordinate rejection sampling of N(0, 1) restricted to |x| <= threshold.
/// An infinite threshold consumes the stream exactly like sample_mfvi_noise.
TruncatedNoise sample_truncated_gaussian(Rng& rng, std::size_t d,
                                         double threshold = std::numeric_limits<double>::infinity());

// Raw-buffer variants used by the layer samplers.
void fill_mfvi_noise(Rng& rng, std::span<double> out);
void fill_radial_noise(Rng& rng, std::span<double> out);
std::size_t fill_truncated_noise(Rng& rng, std::span<double> out, double threshold);

/// Density of ||w - mu|| for an isotropic d-dimensional Gaussian with scale sigma.
double radius_pdf(double r, std::size_t d, double sigma);
double log_radius_pdf(double r, std::size_t d, double sigma);
/// Location of the density peak: sigma * sqrt(d - 1), or 0 when d == 1.
double radius_mode(std::size_t d, double sigma);

/// log of the surface area of the unit sphere in R^d.
double log_unit_sphere_area(std::size_t d);

/// Mean Euclidean distance over all unordered pairs.
double mean_pairwise_distance(std::span<const std::vector<double>> samples);

}  // namespace radial
