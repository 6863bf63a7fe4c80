#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "radial/elbo.hpp"
#include "radial/hyperspherical.hpp"
#include "radial/noise.hpp"

namespace radial {

namespace {

constexpr double kQuadratureTolerance = 1e-10;

std::mutex cache_mutex;
std::map<std::size_t, double> sine_cache;      // m -> int sin^m log sin^m
std::map<std::size_t, double> constant_cache;  // d -> entropy constant

double integrate_sine_power_log(std::size_t m) {
  if (m == 0) return 0.0;
  const double mm = static_cast<double>(m);
  auto f = [mm](double t) {
    const double s = std::sin(t);
    if (s <= 0.0) return 0.0;
    const double ls = std::log(s);
    return std::exp(mm * ls) * mm * ls;
  };
  // The integrand is symmetric about pi/2 and peaks there for large m, so
  // integrate one half with the peak at an endpoint.
  boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double half = integrator.integrate(f, 0.0, std::numbers::pi / 2, kQuadratureTolerance,
                                           &error, &l1);
  if (!std::isfinite(half) || error > 1e-8 * std::max(l1, 1e-300))
    throw std::runtime_error("entropy_constant: quadrature for sine power " + std::to_string(m) +
                             " did not converge (estimated relative error " +
                             std::to_string(error / std::max(l1, 1e-300)) + ")");
  return 2.0 * half;
}

}  // namespace

double sine_power_log_integral(std::size_t m) {
  {
    std::lock_guard lock(cache_mutex);
    if (auto it = sine_cache.find(m); it != sine_cache.end()) return it->second;
  }
  const double value = integrate_sine_power_log(m);
  std::lock_guard lock(cache_mutex);
  sine_cache.emplace(m, value);
  return value;
}

double gaussian_entropy_constant(std::size_t d) {
  return -0.5 * static_cast<double>(d) * (1.0 + std::log(2.0 * std::numbers::pi));
}

double entropy_constant(std::size_t d) {
  if (d < 2) throw std::invalid_argument("entropy_constant: need d >= 2, got " + std::to_string(d));
  {
    std::lock_guard lock(cache_mutex);
    if (auto it = constant_cache.find(d); it != constant_cache.end()) return it->second;
  }
  const double dd = static_cast<double>(d);
  // Half-normal radius: E[log pdf(r)] and E[log r].
  const double expected_log_radius_pdf = 0.5 * std::log(2.0 / std::numbers::pi) - 0.5;
  const double expected_log_radius = -0.5 * (std::numbers::egamma + std::log(2.0));

  // Angle a_k (k = 1..d-2) has density sin^m(a_k) / Z_m with m = d-1-k.
  double expected_log_sines = 0.0;
  for (std::size_t m = 1; m + 1 < d; ++m)
    expected_log_sines += sine_power_log_integral(m) / std::exp(log_sine_power_integral(m));

  // E[log q] in (r, angles) space, and E[log |J|] of the map to Cartesian.
  const double log_q_angles = expected_log_radius_pdf - log_unit_sphere_area(d) + expected_log_sines;
  const double log_jacobian = (dd - 1.0) * expected_log_radius + expected_log_sines;
  const double value = log_q_angles - log_jacobian;

  std::lock_guard lock(cache_mutex);
  constant_cache.emplace(d, value);
  return value;
}

}  // namespace radial
