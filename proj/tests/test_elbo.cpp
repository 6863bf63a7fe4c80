#include <cmath>
#include <numbers>

#include "doctest.h"
#include "radial/elbo.hpp"
#include "radial/gradcheck.hpp"
#include "radial/stats.hpp"

using namespace radial;

namespace {

constexpr double kPi = std::numbers::pi;
const double kLog2Pi = std::log(2.0 * kPi);

Architecture tiny(std::size_t heads = 1) {
  Architecture a;
  a.input_dim = 3;
  a.hidden = {4};
  a.output_dim = 2;
  a.heads = heads;
  a.head_mode = heads > 1 ? HeadMode::multi : HeadMode::single;
  return a;
}

Tensor batch(Rng& rng, std::size_t n, std::size_t d) {
  Tensor x = Tensor::zeros({n, d});
  for (double& v : x.mutable_data()) v = rng.normal();
  return x;
}

void zero_means(VariationalNetwork& net) {
  for (auto* group : {&net.trunk(), &net.heads()})
    for (auto& layer : *group) {
      for (double& v : layer.weight_mu().mutable_data()) v = 0.0;
      for (double& v : layer.bias_mu().mutable_data()) v = 0.0;
    }
}

double half_normal_pdf(double r) { return 2.0 * std::exp(-0.5 * r * r) / std::sqrt(2.0 * kPi); }

/// E[log q] for d-dim radial noise from the Cartesian density
/// half-normal(r) / (S_d r^(d-1)), integrated over r with the shell area S_d r^(d-1).
double cartesian_entropy_oracle(std::size_t d) {
  const double log_s = d == 2 ? std::log(2 * kPi) : std::log(4 * kPi);
  const int n = 400000;
  const double h = 14.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = (i + 0.5) * h;
    const double q = half_normal_pdf(r);
    total += q * (std::log(q) - log_s - static_cast<double>(d - 1) * std::log(r)) * h;
  }
  return total;
}

}  // namespace

TEST_CASE("entropy term examples") {
  const Tensor ones[] = {Tensor::full({3, 2}, 1.0)};
  CHECK(entropy_term(ones).item() == 0.0);
  const Tensor ee[] = {Tensor::full({2}, std::exp(1.0))};
  CHECK(entropy_term(ee).item() == doctest::Approx(-2.0).epsilon(1e-14));
  Rng rng(1);
  Tensor s = Tensor::zeros({7});
  for (double& v : s.mutable_data()) v = 0.1 + rng.uniform();
  const Tensor one[] = {s};
  const Tensor two[] = {s * 2.0};
  CHECK(entropy_term(two).item() == doctest::Approx(entropy_term(one).item() - 7 * std::log(2.0)).epsilon(1e-14));
  const Tensor bad[] = {Tensor::from_vector({1.0, 0.0}, {2})};
  CHECK_THROWS_AS((void)entropy_term(bad), std::domain_error);
}

TEST_CASE("entropy constant against Cartesian quadrature") {
  CHECK(std::abs(entropy_constant(2) - cartesian_entropy_oracle(2)) < 1e-3);
  CHECK(std::abs(entropy_constant(3) - cartesian_entropy_oracle(3)) < 1e-2);
  CHECK(gaussian_entropy_constant(4) == doctest::Approx(-2.0 * (1.0 + kLog2Pi)).epsilon(1e-14));
  CHECK(entropy_constant(5) == entropy_constant(5));
}

TEST_CASE("full entropy is invariant to sigma once the log term is removed") {
  const std::size_t D = 6;
  const Tensor ones[] = {Tensor::full({D}, 1.0)};
  const Tensor twos[] = {Tensor::full({D}, 2.0)};
  const double at1 = entropy_term(ones).item() + entropy_constant(D);
  const double at2 = entropy_term(twos).item() + entropy_constant(D);
  CHECK(std::abs(at2 + D * std::log(2.0) - at1) < 1e-9);
}

TEST_CASE("sine-power log integrals") {
  // int_0^pi sin t log sin t dt = 2 log 2 - 2
  CHECK(sine_power_log_integral(1) == doctest::Approx(2 * std::log(2.0) - 2).epsilon(1e-10));
  CHECK(sine_power_log_integral(0) == 0.0);
}

TEST_CASE("unit Gaussian cross-entropy") {
  CHECK(cross_entropy_unit_gaussian_analytic(Tensor::zeros({10}), Tensor::full({10}, 1.0)).item() == 5.0);
  CHECK(cross_entropy_unit_gaussian_analytic(Tensor::from_vector({3, 4}, {2}), Tensor::zeros({2})).item() == 12.5);

  Rng rng(2);
  const std::size_t D = 4;
  Tensor mu = Tensor::zeros({D}), sigma = Tensor::zeros({D});
  for (double& v : mu.mutable_data()) v = rng.normal();
  for (double& v : sigma.mutable_data()) v = 0.3 + rng.uniform();
  const double analytic = cross_entropy_unit_gaussian_analytic(mu, sigma).item() + 0.5 * D * kLog2Pi;
  std::vector<double> vals;
  for (int n = 0; n < 10000; ++n) {
    Tensor w = Tensor::zeros({D});
    auto out = w.mutable_data();
    for (std::size_t i = 0; i < D; ++i) out[i] = mu.data()[i] + sigma.data()[i] * rng.normal();
    const Tensor one[] = {w};
    vals.push_back(cross_entropy_mc(UnitGaussianPrior{}, one).item());
  }
  const double se = stats::stddev(vals) / std::sqrt(static_cast<double>(vals.size()));
  CHECK(std::abs(stats::mean(vals) - analytic) < 3 * se);
}

TEST_CASE("Monte Carlo cross-entropy") {
  const Tensor origin[] = {Tensor::zeros({2})};
  CHECK(cross_entropy_mc(UnitGaussianPrior{}, origin).item() == doctest::Approx(1.837877).epsilon(1e-6));
  DiagonalGaussianPrior p{{0.5, -1.0, 2.0}, {1.0, 1.0, 1.0}};
  const Tensor at_mean[] = {Tensor::from_vector(p.mu, {3})};
  CHECK(cross_entropy_mc(p, at_mean).item() == doctest::Approx(1.5 * kLog2Pi).epsilon(1e-12));
  CHECK_THROWS_AS((void)cross_entropy_mc(RadialSnapshotPrior{{0.0}, {1.0}}, origin), std::invalid_argument);

  // estimator spread shrinks as 1/sqrt(N)
  Rng rng(3);
  auto spread = [&](int n) {
    std::vector<double> reps;
    for (int r = 0; r < 400; ++r) {
      std::vector<Tensor> samples;
      for (int i = 0; i < n; ++i) {
        Tensor w = Tensor::zeros({3});
        for (double& v : w.mutable_data()) v = rng.normal();
        samples.push_back(w);
      }
      reps.push_back(cross_entropy_mc(p, samples).item());
    }
    return stats::stddev(reps);
  };
  const double ratio = spread(100) / spread(10) * std::sqrt(10.0);
  CHECK(ratio > 1 / 1.5);
  CHECK(ratio < 1.5);
}

TEST_CASE("radial-prior cross-entropy") {
  RadialSnapshotPrior p{{0.1, -0.2, 0.3, 0.0}, {0.5, 1.0, 2.0, 0.25}};
  const Tensor at_mu[] = {Tensor::from_vector(p.mu, {4})};
  const auto zero = radial_prior_cross_entropy_mc(p, at_mu);
  CHECK(zero.value.item() == 0.0);
  CHECK(zero.missing_jacobian);
  std::vector<double> shifted(4);
  for (std::size_t i = 0; i < 4; ++i) shifted[i] = p.mu[i] + p.sigma[i];
  const Tensor one_sd[] = {Tensor::from_vector(shifted, {4})};
  CHECK(radial_prior_cross_entropy_mc(p, one_sd).value.item() == doctest::Approx(2.0).epsilon(1e-14));

  Rng rng(4);
  std::vector<Tensor> samples;
  for (int i = 0; i < 5; ++i) {
    Tensor w = Tensor::zeros({4});
    for (double& v : w.mutable_data()) v = rng.normal();
    samples.push_back(w);
  }
  RadialSnapshotPrior wide = p;
  for (double& s : wide.sigma) s *= 2.0;
  CHECK(radial_prior_cross_entropy_mc(wide, samples).value.item() ==
        doctest::Approx(0.25 * radial_prior_cross_entropy_mc(p, samples).value.item()).epsilon(1e-12));
  const Tensor wrong[] = {Tensor::zeros({3})};
  CHECK_THROWS_AS((void)radial_prior_cross_entropy_mc(p, wrong), ShapeError);
}

TEST_CASE("classification NLL") {
  const std::vector<std::size_t> labels{0, 3, 4};
  CHECK(nll_classification(Tensor::zeros({2, 3, 5}), labels).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  const std::vector<std::size_t> first{0};
  CHECK(nll_classification(Tensor::from_vector({20.0, 0.0}, {1, 1, 2}), first).item() < 1e-8);
  const std::vector<std::size_t> out_of_range{5};
  CHECK_THROWS_AS((void)nll_classification(Tensor::zeros({1, 1, 5}), out_of_range), std::out_of_range);

  Rng rng(5);
  Tensor logits = Tensor::zeros({3, 4, 3});
  for (double& v : logits.mutable_data()) v = rng.normal();
  const std::vector<std::size_t> y{0, 2, 1, 2};
  CHECK(gradcheck([&](const Tensor& t) { return nll_classification(t, y); }, logits) < 1e-6);
}

TEST_CASE("kl at sigma = 1, mu = 0 under the unit prior is D/2") {
  Rng init(6);
  VariationalNetwork net(tiny(), PosteriorFamily::mfvi(), 0.0, init);
  zero_means(net);
  net.set_sigma(1.0);
  const KlTerms kt = kl_terms(net, unit_prior(net), 0, {}, false);
  CHECK(std::abs(kt.entropy.item()) < 1e-12);
  const double D = static_cast<double>(net.num_params(0));
  CHECK((kt.entropy + kt.cross_entropy).item() == doctest::Approx(D / 2).epsilon(1e-12));
}

TEST_CASE("analytic KL matches entropy plus Monte Carlo cross-entropy") {
  Rng rng(7);
  const std::size_t D = 5;
  std::vector<double> mu(D), sigma(D), pm(D), ps(D);
  for (std::size_t i = 0; i < D; ++i) {
    mu[i] = rng.normal();
    sigma[i] = 0.2 + rng.uniform();
    pm[i] = rng.normal();
    ps[i] = 0.5 + rng.uniform();
  }
  const double kl = kl_diagonal_gaussian(mu, sigma, pm, ps);
  CHECK(kl >= 0.0);
  CHECK(kl_diagonal_gaussian(mu, sigma, mu, sigma) == doctest::Approx(0.0).epsilon(1e-14));

  const Tensor sig[] = {Tensor::from_vector(sigma, {D})};
  const double entropy = entropy_term(sig).item() + gaussian_entropy_constant(D);
  const DiagonalGaussianPrior prior{pm, ps};
  CHECK(entropy + cross_entropy_diagonal_analytic(Tensor::from_vector(mu, {D}), sig[0], prior).item() ==
        doctest::Approx(kl).epsilon(1e-12));
  std::vector<double> vals;
  for (int n = 0; n < 20000; ++n) {
    std::vector<double> w(D);
    for (std::size_t i = 0; i < D; ++i) w[i] = mu[i] + sigma[i] * rng.normal();
    const Tensor one[] = {Tensor::from_vector(w, {D})};
    vals.push_back(entropy + cross_entropy_mc(prior, one).item());
  }
  const double se = stats::stddev(vals) / std::sqrt(static_cast<double>(vals.size()));
  CHECK(std::abs(stats::mean(vals) - kl) < 3 * se);
}

TEST_CASE("zero-KL configuration gives total = nll") {
  Rng init(8), rng(9), data(10);
  VariationalNetwork net(tiny(), PosteriorFamily::mfvi(), -2.0, init);
  const Prior prior = load_prior(snapshot(net), net);
  const Tensor x = batch(data, 6, 3);
  const std::vector<std::size_t> y{0, 1, 1, 0, 1, 0};
  ElboOptions opt;
  opt.dataset_size = 60;
  opt.include_constants = true;
  const ElboResult r = elbo_loss(net, x, y, prior, 0, opt, rng);
  CHECK(std::abs(r.breakdown.kl) < 1e-8);
  CHECK(r.breakdown.total == doctest::Approx(r.breakdown.nll).epsilon(1e-10));
  CHECK_FALSE(r.radial_prior_caveat);
}

TEST_CASE("breakdown identities and scaling") {
  Rng init(11), data(12);
  VariationalNetwork net(tiny(), PosteriorFamily::radial(), -1.0, init);
  const Tensor x = batch(data, 4, 3);
  const std::vector<std::size_t> y{0, 1, 1, 0};
  for (bool constants : {false, true}) {
    for (KlScaling scaling : {KlScaling::batch_fraction, KlScaling::per_example}) {
      Rng rng(13);
      ElboOptions opt{2, 40, constants, scaling};
      const ElboResult r = elbo_loss(net, x, y, unit_prior(net), 0, opt, rng);
      const auto& b = r.breakdown;
      CHECK(b.kl == doctest::Approx(b.entropy_term - b.cross_entropy_term).epsilon(1e-12));
      CHECK(std::abs(b.total - (b.nll + b.scale * (b.entropy_term - b.cross_entropy_term))) < 1e-12 * std::max(1.0, std::abs(b.total)));
      CHECK(b.scale == (scaling == KlScaling::batch_fraction ? 0.1 : 1.0 / 40));
    }
  }
  // the two scalings are the same objective up to the batch-size factor
  Rng a(14), b(14);
  const double bf = elbo_loss(net, x, y, unit_prior(net), 0, ElboOptions{1, 40, false, KlScaling::batch_fraction}, a).breakdown.total;
  const double pe = elbo_loss(net, x, y, unit_prior(net), 0, ElboOptions{1, 40, false, KlScaling::per_example}, b).breakdown.total;
  CHECK(bf == doctest::Approx(4.0 * pe).epsilon(1e-12));

  Rng c(15);
  CHECK_THROWS_AS((void)elbo_loss(net, x, y, unit_prior(net), 0, ElboOptions{1, 3, false, KlScaling::batch_fraction}, c),
                  std::invalid_argument);
}

TEST_CASE("KL scale sums to one over an epoch") {
  Rng init(16), data(17);
  VariationalNetwork net(tiny(), PosteriorFamily::mfvi(), -1.0, init);
  const std::size_t N = 10;
  double total_scale = 0.0;
  for (std::size_t bsz : {4u, 4u, 2u}) {
    Rng rng(18);
    const Tensor x = batch(data, bsz, 3);
    const std::vector<std::size_t> y(bsz, 1);
    total_scale += elbo_loss(net, x, y, unit_prior(net), 0, ElboOptions{1, N, false, KlScaling::batch_fraction}, rng)
                       .breakdown.scale;
  }
  CHECK(total_scale == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rho gradient of the loss does not depend on the constants flag") {
  Rng init(19), data(20);
  VariationalNetwork net(tiny(), PosteriorFamily::radial(), -1.0, init);
  const Tensor x = batch(data, 3, 3);
  const std::vector<std::size_t> y{1, 0, 1};
  auto grads = [&](bool constants) {
    net.zero_grad();
    Rng rng(21);
    elbo_loss(net, x, y, unit_prior(net), 0, ElboOptions{1, 30, constants, KlScaling::batch_fraction}, rng).loss.backward();
    return net.trunk()[0].weight_rho().grad();
  };
  const auto off = grads(false);
  const auto on = grads(true);
  for (std::size_t i = 0; i < off.size(); ++i) CHECK(off[i] == doctest::Approx(on[i]).epsilon(1e-12));
}

TEST_CASE("radial prior propagates the caveat flag") {
  Rng init(22), rng(23), data(24);
  VariationalNetwork net(tiny(), PosteriorFamily::radial(), -1.0, init);
  const Prior prior = load_prior(snapshot(net), net);
  const Tensor x = batch(data, 2, 3);
  const std::vector<std::size_t> y{0, 1};
  CHECK(elbo_loss(net, x, y, prior, 0, ElboOptions{1, 10, false, KlScaling::batch_fraction}, rng).radial_prior_caveat);
}

TEST_CASE("full objective passes gradcheck with frozen noise") {
  Rng data(25);
  const Tensor x = batch(data, 5, 3);
  const std::vector<std::size_t> y{0, 1, 1, 0, 1};
  int configs = 0;
  for (auto fam : {PosteriorFamily::mfvi(), PosteriorFamily::radial(), PosteriorFamily::truncated(1.0)}) {
    for (int prior_kind = 0; prior_kind < 3; ++prior_kind) {
      for (KlScaling scaling : {KlScaling::batch_fraction, KlScaling::per_example}) {
        for (bool constants : {false, true}) {
          Rng init(26), rng(27);
          VariationalNetwork net(tiny(2), fam, -1.0, init);
          Prior prior = unit_prior(net);
          if (prior_kind > 0) {
            Rng other_init(28);
            VariationalNetwork src(tiny(2), prior_kind == 1 ? PosteriorFamily::mfvi() : PosteriorFamily::radial(), -0.5,
                                   other_init);
            prior = load_prior(snapshot(src), net);
          }
          std::vector<NetworkNoise> noise{net.draw_noise(rng, 1), net.draw_noise(rng, 1)};
          const ElboOptions opt{2, 50, constants, scaling};
          auto leaves = net.parameters(1);
          auto f = [&] { return elbo_loss_with_noise(net, x, y, prior, 1, opt, noise).loss; };
          const double err = gradcheck(f, leaves);
          INFO("family " << to_string(fam.kind) << " prior " << prior_kind << " constants " << constants);
          CHECK(err < 1e-6);
          ++configs;
        }
      }
    }
  }
  CHECK(configs == 36);
}
