#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace radial {

/// Point in d-dimensional hyperspherical coordinates.
///
/// Convention: x_1 = r cos(a_1); x_k = r cos(a_k) prod_{j<k} sin(a_j) for
/// 1 < k < d; x_d = r prod_{j<d} sin(a_j). The first d - 2 angles lie in
/// [0, pi], the last in [-pi, pi).
struct HypersphericalPoint {
  double radius = 0.0;
  std::vector<double> angles;  ///< d - 1 entries

  std::size_t dimension() const { return angles.size() + 1; }
};

HypersphericalPoint cartesian_to_hyperspherical(std::span<const double> x);
std::vector<double> hyperspherical_to_cartesian(const HypersphericalPoint& p);

/// log |det d(x)/d(r, angles)| = (d-1) log r + sum_{k=1}^{d-2} (d-1-k) log sin(a_k).
double hyperspherical_jacobian_logdet(const HypersphericalPoint& p);

/// log of int_0^pi sin^m(t) dt.
double log_sine_power_integral(std::size_t m);

struct RadialLogDensity {
  double radial = 0.0;   ///< log half-normal(r)
  double angular = 0.0;  ///< log of the normalized uniform-direction density in angle space
  double total() const { return radial + angular; }
};

/// Normalized log density of the radial noise (half-normal radius, uniform
/// direction) expressed in hyperspherical coordinates.
RadialLogDensity radial_noise_log_density(const HypersphericalPoint& p);
double radial_noise_logpdf(const HypersphericalPoint& p, std::size_t d);

}  // namespace radial
