#include <cmath>
#include <numbers>

#include "doctest.h"
#include "radial/noise.hpp"
#include "radial/rng.hpp"
#include "radial/stats.hpp"

using namespace radial;

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("same seed gives the same stream, split depends only on seed and tag") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  const Rng fresh(7);
  Rng used(7);
  for (int i = 0; i < 50; ++i) used.normal();
  Rng s1 = fresh.split("train"), s2 = used.split("train");
  for (int i = 0; i < 20; ++i) CHECK(s1.uniform() == s2.uniform());
  CHECK(fresh.split("a").next_u64() != fresh.split("b").next_u64());
  CHECK(fresh.split(std::uint64_t{1}).next_u64() != fresh.split(std::uint64_t{2}).next_u64());
}

TEST_CASE("gaussian tensors are reproducible") {
  Rng a(3), b(3);
  const Tensor x = gaussian(a, {4, 5});
  const Tensor y = gaussian(b, {4, 5});
  CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST_CASE("gaussian moments over 1e5 draws") {
  Rng rng(1);
  const Tensor x = gaussian(rng, {100000});
  const std::vector<double> v(x.data().begin(), x.data().end());
  CHECK(std::abs(stats::mean(v)) < 0.02);
  CHECK(std::abs(stats::variance(v) - 1.0) < 0.02);
}

TEST_CASE("gaussian passes KS against the normal cdf") {
  Rng rng(2);
  const Tensor x = gaussian(rng, {10000});
  const double ks = stats::ks_statistic({x.data().begin(), x.data().end()}, stats::normal_cdf);
  CHECK(ks < stats::ks_critical_value(10000, 0.01));
}

TEST_CASE("split streams are uncorrelated") {
  const Rng root(9);
  Rng a = root.split("left"), b = root.split("right");
  std::vector<double> xs(100000), ys(100000);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = a.uniform();
    ys[i] = b.uniform();
  }
  CHECK(std::abs(stats::pearson(xs, ys)) < 0.02);
}

TEST_CASE("mfvi noise: mean and chi-squared radius") {
  Rng rng(4);
  const Tensor one = sample_mfvi_noise(rng, 1);
  CHECK(one.numel() == 1);
  double s = 0.0;
  for (int i = 0; i < 100000; ++i) s += sample_mfvi_noise(rng, 1).item();
  CHECK(std::abs(s / 100000) < 0.02);
  double sq = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Tensor e = sample_mfvi_noise(rng, 100);
    for (double v : e.data()) sq += v * v;
  }
  CHECK(std::abs(sq / 10000 / 100 - 1.0) < 0.02);
}

TEST_CASE("radial noise radius is half-normal at d = 4608") {
  Rng rng(5);
  std::vector<double> r(10000);
  for (auto& x : r) x = norm2(sample_radial_noise(rng, 4608).data());
  CHECK(stats::ks_statistic(r, stats::half_normal_cdf) < stats::ks_critical_value(r.size(), 0.01));
}

TEST_CASE("radial noise coordinates are centred, d = 1 is standard normal") {
  Rng rng(6);
  double s = 0.0;
  for (int i = 0; i < 100000; ++i) s += sample_radial_noise(rng, 3).data()[0];
  CHECK(std::abs(s / 100000) < 0.02);
  std::vector<double> x(10000);
  for (auto& v : x) v = sample_radial_noise(rng, 1).item();
  CHECK(stats::ks_statistic(x, stats::normal_cdf) < stats::ks_critical_value(x.size(), 0.01));
}

TEST_CASE("radial marginal is lighter tailed than the Gaussian at d = 10") {
  Rng rng(8);
  std::vector<double> x(1000000);
  std::vector<double> buf(10);
  std::size_t beyond = 0;
  for (auto& v : x) {
    fill_radial_noise(rng, buf);
    v = buf[0];
    if (std::abs(v) > 2.0) ++beyond;
  }
  CHECK(stats::excess_kurtosis(x) > 0.0);
  CHECK(static_cast<double>(beyond) / 1e6 < 0.0455);
}

TEST_CASE("radius pdf: Rayleigh at d = 2, half-normal at d = 1, normalized") {
  Rng rng(10);
  std::size_t in_bin = 0;
  const double lo = 0.95, hi = 1.05;
  for (int i = 0; i < 1000000; ++i) {
    const double r = norm2(sample_mfvi_noise(rng, 2).data());
    if (r >= lo && r < hi) ++in_bin;
  }
  const double density = static_cast<double>(in_bin) / 1e6 / (hi - lo);
  CHECK(std::abs(density / radius_pdf(1.0, 2, 1.0) - 1.0) < 0.02);
  CHECK(radius_pdf(1.0, 2, 1.0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  for (double r : {0.0, 0.3, 1.7})
    CHECK(radius_pdf(r, 1, 2.0) == doctest::Approx(2.0 * stats::normal_pdf(r / 2.0) / 2.0).epsilon(1e-12));

  for (std::size_t d : {1u, 2u, 10u, 100u}) {
    const double sigma = 0.7;
    const double top = sigma * std::sqrt(static_cast<double>(d)) + 10.0 * sigma;
    const int n = 200000;
    const double h = top / n;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = i * h, m = a + h / 2, b = a + h;
      integral += h / 6 * (radius_pdf(a, d, sigma) + 4 * radius_pdf(m, d, sigma) + radius_pdf(b, d, sigma));
    }
    CHECK(std::abs(integral - 1.0) < 1e-6);
  }
}

TEST_CASE("radius mode") {
  CHECK(radius_mode(2, 1.0) == 1.0);
  CHECK(radius_mode(1, 1.0) == 0.0);
  const double star = radius_mode(36864, 0.02);
  CHECK(star == doctest::Approx(0.02 * std::sqrt(36863.0)).epsilon(1e-12));
  CHECK(star == doctest::Approx(3.8399).epsilon(1e-4));
  double best = 0.0, arg = 0.0;
  for (int i = 1; i <= 20000; ++i) {
    const double r = 3.7 + 0.3 * i / 20000.0;
    const double lp = log_radius_pdf(r, 36864, 0.02);
    if (i == 1 || lp > best) best = lp, arg = r;
  }
  CHECK(std::abs(arg - star) < 2e-5);
}

TEST_CASE("mean pairwise distance") {
  Rng rng(12);
  auto sphere = [&](std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (auto& p : pts) {
      fill_mfvi_noise(rng, p);
      const double r = norm2(p);
      for (double& x : p) x /= r;
    }
    return pts;
  };
  CHECK(std::abs(mean_pairwise_distance(sphere(1000, 1000)) / std::sqrt(2.0) - 1.0) < 0.01);
  CHECK(std::abs(mean_pairwise_distance(sphere(10000, 2)) / (4.0 / std::numbers::pi) - 1.0) < 0.02);
  const std::vector<std::vector<double>> same(5, std::vector<double>{0.3, 0.4});
  CHECK(mean_pairwise_distance(same) == 0.0);
}

TEST_CASE("truncated gaussian") {
  Rng a(13), b(13);
  const TruncatedNoise inf = sample_truncated_gaussian(a, 1000);
  const Tensor plain = sample_mfvi_noise(b, 1000);
  CHECK(std::equal(inf.noise.data().begin(), inf.noise.data().end(), plain.data().begin()));

  Rng rng(14);
  const TruncatedNoise t = sample_truncated_gaussian(rng, 100000, 1.0);
  double worst = 0.0;
  for (double v : t.noise.data()) worst = std::max(worst, std::abs(v));
  CHECK(worst <= 1.0);
  CHECK(std::abs(t.acceptance_rate() - std::erf(1.0 / std::sqrt(2.0))) < 0.005);
  CHECK_THROWS_AS(sample_truncated_gaussian(rng, 3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_truncated_gaussian(rng, 3, -1.0), std::invalid_argument);
}
