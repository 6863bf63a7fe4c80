#include <cmath>
#include <numbers>

#include "doctest.h"
#include "radial/hyperspherical.hpp"
#include "radial/noise.hpp"
#include "radial/rng.hpp"

using namespace radial;

namespace {

constexpr double kPi = std::numbers::pi;

HypersphericalPoint random_point(Rng& rng, std::size_t d) {
  HypersphericalPoint p;
  p.radius = 0.2 + 2.0 * rng.uniform();
  for (std::size_t k = 0; k + 2 < d; ++k) p.angles.push_back(0.05 + (kPi - 0.1) * rng.uniform());
  p.angles.push_back(-kPi + 2.0 * kPi * rng.uniform());
  return p;
}

/// log |det J| by central differences and partial-pivot LU.
double numerical_logdet(const HypersphericalPoint& p) {
  const std::size_t d = p.dimension();
  const double h = 1e-6;
  std::vector<std::vector<double>> J(d, std::vector<double>(d));
  for (std::size_t j = 0; j < d; ++j) {
    HypersphericalPoint up = p, down = p;
    double& u = j == 0 ? up.radius : up.angles[j - 1];
    double& w = j == 0 ? down.radius : down.angles[j - 1];
    u += h;
    w -= h;
    const auto xu = hyperspherical_to_cartesian(up);
    const auto xd = hyperspherical_to_cartesian(down);
    for (std::size_t i = 0; i < d; ++i) J[i][j] = (xu[i] - xd[i]) / (2 * h);
  }
  double logdet = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(J[r][c]) > std::abs(J[piv][c])) piv = r;
    std::swap(J[c], J[piv]);
    logdet += std::log(std::abs(J[c][c]));
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = J[r][c] / J[c][c];
      for (std::size_t k = c; k < d; ++k) J[r][k] -= f * J[c][k];
    }
  }
  return logdet;
}

double half_normal_pdf(double r) { return 2.0 * std::exp(-0.5 * r * r) / std::sqrt(2.0 * kPi); }

}  // namespace

TEST_CASE("axis points map to the expected angles") {
  auto p = cartesian_to_hyperspherical(std::vector<double>{1.0, 0.0});
  CHECK(p.radius == 1.0);
  CHECK(p.angles[0] == 0.0);
  p = cartesian_to_hyperspherical(std::vector<double>{0.0, 2.0});
  CHECK(p.radius == 2.0);
  CHECK(p.angles[0] == doctest::Approx(kPi / 2));
  p = cartesian_to_hyperspherical(std::vector<double>{-1.0, 0.0});
  CHECK(p.angles[0] == doctest::Approx(-kPi));
  p = cartesian_to_hyperspherical(std::vector<double>{0.0, 0.0, 3.0});
  CHECK(p.radius == 3.0);
  CHECK(p.angles[0] == doctest::Approx(kPi / 2));
  CHECK(p.angles[1] == doctest::Approx(kPi / 2));
  CHECK_THROWS_AS((void)cartesian_to_hyperspherical(std::vector<double>{0.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS((void)cartesian_to_hyperspherical(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("cartesian round trip") {
  Rng rng(1);
  for (std::size_t d = 2; d <= 8; ++d) {
    for (int t = 0; t < 50; ++t) {
      std::vector<double> x(d);
      for (double& v : x) v = rng.normal();
      const auto back = hyperspherical_to_cartesian(cartesian_to_hyperspherical(x));
      for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(back[i] - x[i]) < 1e-10);
    }
  }
}

TEST_CASE("jacobian log-determinant matches finite differences for d = 2..6") {
  Rng rng(2);
  for (std::size_t d = 2; d <= 6; ++d) {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const auto p = random_point(rng, d);
      worst = std::max(worst, std::abs(hyperspherical_jacobian_logdet(p) - numerical_logdet(p)));
    }
    CHECK(worst < 1e-4);
  }
  HypersphericalPoint p{2.0, {0.7}};
  CHECK(hyperspherical_jacobian_logdet(p) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  p = HypersphericalPoint{1.0, {kPi / 2, 0.3}};
  CHECK(hyperspherical_jacobian_logdet(p) == doctest::Approx(0.0).epsilon(1e-14));
  p.radius = 0.0;
  CHECK_THROWS_AS((void)hyperspherical_jacobian_logdet(p), std::domain_error);
}

TEST_CASE("sine power integral") {
  CHECK(std::exp(log_sine_power_integral(0)) == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(std::exp(log_sine_power_integral(1)) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::exp(log_sine_power_integral(2)) == doctest::Approx(kPi / 2).epsilon(1e-14));
  CHECK(std::exp(log_sine_power_integral(3)) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("radial density radial part at r = 0") {
  const auto parts = radial_noise_log_density(HypersphericalPoint{0.0, {0.4, 1.0}});
  CHECK(parts.radial == doctest::Approx(std::log(2.0 / std::sqrt(2.0 * kPi))).epsilon(1e-14));
  // uniform direction on the circle
  const auto circle = radial_noise_log_density(HypersphericalPoint{1.0, {0.4}});
  CHECK(circle.angular == doctest::Approx(-std::log(2.0 * kPi)).epsilon(1e-14));
}

TEST_CASE("radial density integrates to one at d = 2 and d = 3") {
  const int nr = 4000, na = 400;
  const double rmax = 12.0, hr = rmax / nr;
  double total2 = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double r = (i + 0.5) * hr;
    for (int j = 0; j < na; ++j) {
      const double a = -kPi + (j + 0.5) * 2 * kPi / na;
      total2 += std::exp(radial_noise_logpdf(HypersphericalPoint{r, {a}}, 2)) * hr * 2 * kPi / na;
    }
  }
  CHECK(std::abs(total2 - 1.0) < 1e-6);

  double total3 = 0.0;
  const int nb = 200;
  for (int i = 0; i < nr; i += 1) {
    const double r = (i + 0.5) * hr;
    for (int j = 0; j < nb; ++j) {
      const double a = (j + 0.5) * kPi / nb;
      // the last angle is uniform, so its integral is exact with one node
      total3 += std::exp(radial_noise_logpdf(HypersphericalPoint{r, {a, 0.1}}, 3)) * hr * (kPi / nb) * 2 * kPi;
    }
  }
  CHECK(std::abs(total3 - 1.0) < 1e-4);
  CHECK_THROWS_AS((void)radial_noise_logpdf(HypersphericalPoint{1.0, {0.1}}, 3), std::invalid_argument);
  CHECK_THROWS_AS((void)radial_noise_logpdf(HypersphericalPoint{1.0, {4.0, 0.1}}, 3), std::domain_error);
}

TEST_CASE("Monte Carlo mean log density agrees with quadrature at d = 3") {
  // E[log q] = E[log half-normal(r)] + E[log sin a_1] - log(4 pi)
  const int n = 200000;
  const double h = 12.0 / n;
  double e_radial = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) * h;
    e_radial += half_normal_pdf(r) * std::log(half_normal_pdf(r)) * h;
  }
  double e_sin = 0.0;
  const double ha = kPi / n;
  for (int i = 0; i < n; ++i) {
    const double a = (i + 0.5) * ha;
    e_sin += 0.5 * std::sin(a) * std::log(std::sin(a)) * ha;
  }
  CHECK(e_sin == doctest::Approx(std::log(2.0) - 1.0).epsilon(1e-6));
  const double quadrature = e_radial + e_sin - std::log(4.0 * kPi);

  Rng rng(3);
  double mc = 0.0, mc2 = 0.0;
  const int m = 100000;
  std::vector<double> x(3);
  for (int i = 0; i < m; ++i) {
    fill_radial_noise(rng, x);
    const double lp = radial_noise_logpdf(cartesian_to_hyperspherical(x), 3);
    mc += lp;
    mc2 += lp * lp;
  }
  mc /= m;
  const double se = std::sqrt((mc2 / m - mc * mc) / m);
  CHECK(std::abs(mc - quadrature) < 5 * se);
}

TEST_CASE("hyperspherical density times Jacobian weighting reproduces Cartesian expectations") {
  // The Cartesian density is q(r, angles) / |J|; integrating f * q_cart * |J| over
  // hyperspherical coordinates must match a Monte Carlo mean over Cartesian draws.
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::cos(x[0]) * std::exp(-s) + x[x.size() - 1] * x[x.size() - 1];
  };
  for (std::size_t d : {2u, 3u}) {
    const int nr = 600, na = 120;
    const double hr = 10.0 / nr;
    double integral = 0.0;
    for (int i = 0; i < nr; ++i) {
      const double r = (i + 0.5) * hr;
      for (int j = 0; j < na; ++j) {
        for (int k = 0; k < (d == 3 ? na : 1); ++k) {
          HypersphericalPoint p{r, {}};
          double cell = hr;
          if (d == 2) {
            p.angles = {-kPi + (j + 0.5) * 2 * kPi / na};
            cell *= 2 * kPi / na;
          } else {
            p.angles = {(j + 0.5) * kPi / na, -kPi + (k + 0.5) * 2 * kPi / na};
            cell *= (kPi / na) * (2 * kPi / na);
          }
          const double log_s = std::log(d == 2 ? 2 * kPi : 4 * kPi);
          const double log_q_cart = std::log(half_normal_pdf(r)) - log_s - static_cast<double>(d - 1) * std::log(r);
          const double w = std::exp(log_q_cart + hyperspherical_jacobian_logdet(p));
          integral += f(hyperspherical_to_cartesian(p)) * w * cell;
        }
      }
    }
    Rng rng(20 + d);
    const int m = 200000;
    double mc = 0.0, mc2 = 0.0;
    std::vector<double> x(d);
    for (int i = 0; i < m; ++i) {
      fill_radial_noise(rng, x);
      const double v = f(x);
      mc += v;
      mc2 += v * v;
    }
    mc /= m;
    const double se = std::sqrt((mc2 / m - mc * mc) / m);
    CHECK(std::abs(mc - integral) < 5 * se);
  }
}
