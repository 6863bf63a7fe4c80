#include "radial/hyperspherical.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "radial/noise.hpp"

namespace radial {

namespace {

constexpr double kPi = std::numbers::pi;

void check_angles(const HypersphericalPoint& p) {
  const std::size_t n = p.angles.size();
  if (n == 0) throw std::invalid_argument("hyperspherical point needs d >= 2");
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (!(p.angles[k] >= 0.0 && p.angles[k] <= kPi))
      throw std::domain_error("hyperspherical angle " + std::to_string(k + 1) + " = " +
                              std::to_string(p.angles[k]) + " outside [0, pi]");
  if (!(p.angles[n - 1] >= -kPi && p.angles[n - 1] < kPi))
    throw std::domain_error("last hyperspherical angle " + std::to_string(p.angles[n - 1]) +
                            " outside [-pi, pi)");
}

}  // namespace

HypersphericalPoint cartesian_to_hyperspherical(std::span<const double> x) {
  const std::size_t d = x.size();
  if (d < 2) throw std::invalid_argument("cartesian_to_hyperspherical: need d >= 2");
  // Suffix norms: tail[k] = ||x_k..x_d||.
  std::vector<double> tail(d + 1, 0.0);
  for (std::size_t k = d; k-- > 0;) tail[k] = std::hypot(tail[k + 1], x[k]);
  if (tail[0] == 0.0)
    throw std::domain_error("cartesian_to_hyperspherical: angles undefined at the origin");

  HypersphericalPoint p;
  p.radius = tail[0];
  p.angles.resize(d - 1);
  for (std::size_t k = 0; k + 2 < d; ++k) p.angles[k] = std::atan2(tail[k + 1], x[k]);
  double last = std::atan2(x[d - 1], x[d - 2]);
  if (last >= kPi) last -= 2.0 * kPi;
  p.angles[d - 2] = last;
  return p;
}

std::vector<double> hyperspherical_to_cartesian(const HypersphericalPoint& p) {
  const std::size_t d = p.dimension();
  if (d < 2) throw std::invalid_argument("hyperspherical_to_cartesian: need d >= 2");
  std::vector<double> x(d);
  double sin_product = p.radius;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    x[k] = sin_product * std::cos(p.angles[k]);
    sin_product *= std::sin(p.angles[k]);
  }
  x[d - 1] = sin_product;
  return x;
}

double hyperspherical_jacobian_logdet(const HypersphericalPoint& p) {
  const std::size_t d = p.dimension();
  if (d < 2) throw std::invalid_argument("hyperspherical_jacobian_logdet: need d >= 2");
  if (!(p.radius > 0.0))
    throw std::domain_error("hyperspherical_jacobian_logdet: radius must be positive");
  double total = static_cast<double>(d - 1) * std::log(p.radius);
  for (std::size_t k = 0; k + 2 < d; ++k) {
    const double s = std::sin(p.angles[k]);
    if (!(s > 0.0))
      throw std::domain_error("hyperspherical_jacobian_logdet: sin(angle " +
                              std::to_string(k + 1) + ") is not positive");
    total += static_cast<double>(d - 2 - k) * std::log(s);
  }
  return total;
}

double log_sine_power_integral(std::size_t m) {
  const double mm = static_cast<double>(m);
  return 0.5 * std::log(kPi) + std::lgamma(0.5 * (mm + 1.0)) - std::lgamma(0.5 * mm + 1.0);
}

RadialLogDensity radial_noise_log_density(const HypersphericalPoint& p) {
  check_angles(p);
  if (p.radius < 0.0) throw std::domain_error("radial_noise_logpdf: negative radius");
  const std::size_t d = p.dimension();
  RadialLogDensity out;
  out.radial = std::log(2.0) - 0.5 * std::log(2.0 * kPi) - 0.5 * p.radius * p.radius;
  double angular = -log_unit_sphere_area(d);
  for (std::size_t k = 0; k + 2 < d; ++k) {
    const std::size_t power = d - 2 - k;
    const double s = std::sin(p.angles[k]);
    if (s <= 0.0) {
      angular = -std::numeric_limits<double>::infinity();
      break;
    }
    angular += static_cast<double>(power) * std::log(s);
  }
  out.angular = angular;
  return out;
}

double radial_noise_logpdf(const HypersphericalPoint& p, std::size_t d) {
  if (d < 2 || p.dimension() != d)
    throw std::invalid_argument("radial_noise_logpdf: point dimension does not match d");
  return radial_noise_log_density(p).total();
}

}  // namespace radial
