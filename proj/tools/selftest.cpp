#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "commands.hpp"
#include "radial/config.hpp"
#include "radial/elbo.hpp"
#include "radial/gradcheck.hpp"
#include "radial/hyperspherical.hpp"
#include "radial/metrics.hpp"
#include "radial/noise.hpp"
#include "radial/optim.hpp"
#include "radial/records.hpp"
#include "radial/snapshot.hpp"
#include "radial/stats.hpp"

namespace radial::cli {

namespace {

struct Check {
  std::string name;
  std::function<std::string()> run;  ///< throws on failure, returns a detail string
};

void expect(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

std::string show(double v) { return format_double(v); }

std::vector<Check> checks(std::uint64_t seed) {
  return {
      {"mfvi_radius_concentration",
       [seed] {
         Rng rng = Rng(seed).split("selftest:mfvi");
         std::vector<double> buf(1000), r(500);
         for (auto& x : r) {
           fill_mfvi_noise(rng, buf);
           double s = 0.0;
           for (double v : buf) s += v * v;
           x = std::sqrt(s);
         }
         const double m = stats::mean(r);
         expect(std::abs(m / std::sqrt(1000.0) - 1.0) < 0.01, "mean radius " + show(m));
         return "mean radius " + show(m);
       }},
      {"radial_radius_half_normal",
       [seed] {
         Rng rng = Rng(seed).split("selftest:radial");
         std::vector<double> buf(10), r(2000);
         for (auto& x : r) {
           fill_radial_noise(rng, buf);
           double s = 0.0;
           for (double v : buf) s += v * v;
           x = std::sqrt(s);
         }
         const double ks = stats::ks_statistic(r, stats::half_normal_cdf);
         expect(ks < stats::ks_critical_value(r.size(), 0.01), "KS " + show(ks));
         return "KS " + show(ks);
       }},
      {"roc_auc_fixture",
       [] {
         const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
         const std::vector<std::size_t> y{0, 0, 1, 1};
         const double a = roc_auc(s, y);
         expect(std::abs(a - 0.75) < 1e-12, "auc " + show(a));
         return show(a);
       }},
      {"ece_fixture",
       [] {
         // Bin [0.6, 0.7): confidence 0.65, accuracy 0.75. Bin [0.8, 0.9): confidence 0.85, accuracy 0.65.
         ProbSamples p{1, 40, 2, {}};
         std::vector<std::size_t> y;
         for (int i = 0; i < 20; ++i) {
           p.values.insert(p.values.end(), {0.65, 0.35});
           y.push_back(i < 15 ? 0 : 1);
         }
         for (int i = 0; i < 20; ++i) {
           p.values.insert(p.values.end(), {0.85, 0.15});
           y.push_back(i < 13 ? 0 : 1);
         }
         const double e = ece(calibration_table(p, y));
         expect(std::abs(e - 0.15) < 1e-12, "ece " + show(e));
         return show(e);
       }},
      {"mutual_information_limits",
       [] {
         const ProbSamples same{2, 1, 2, {0.3, 0.7, 0.3, 0.7}};
         const ProbSamples opposed{2, 1, 2, {1.0, 0.0, 0.0, 1.0}};
         const double a = predictive_mutual_information(same)[0];
         const double b = predictive_mutual_information(opposed)[0];
         expect(a == 0.0 && std::abs(b - std::log(2.0)) < 1e-12, "mi " + show(a) + " " + show(b));
         return show(a) + " " + show(b);
       }},
      {"entropy_constant_closed_form",
       [] {
         double worst = 0.0;
         for (std::size_t d = 2; d <= 6; ++d) {
           const double k = static_cast<double>(d);
           const double closed = 0.5 * std::log(2.0 / std::numbers::pi) - 0.5 - log_unit_sphere_area(d) +
                                 (k - 1.0) * (std::numbers::egamma + std::log(2.0)) / 2.0;
           worst = std::max(worst, std::abs(entropy_constant(d) - closed));
         }
         expect(worst < 1e-8, "max diff " + show(worst));
         return "max diff " + show(worst);
       }},
      {"hyperspherical_jacobian",
       [] {
         HypersphericalPoint p{1.3, {0.7, 1.1, 2.0, -0.4}};
         const std::size_t d = p.dimension();
         // Central differences of the Cartesian map, then LU determinant.
         std::vector<double> J(d * d);
         const double h = 1e-6;
         for (std::size_t c = 0; c < d; ++c) {
           HypersphericalPoint a = p, b = p;
           (c == 0 ? a.radius : a.angles[c - 1]) += h;
           (c == 0 ? b.radius : b.angles[c - 1]) -= h;
           const auto xa = hyperspherical_to_cartesian(a);
           const auto xb = hyperspherical_to_cartesian(b);
           for (std::size_t r = 0; r < d; ++r) J[r * d + c] = (xa[r] - xb[r]) / (2 * h);
         }
         double logdet = 0.0;
         for (std::size_t k = 0; k < d; ++k) {
           std::size_t piv = k;
           for (std::size_t r = k + 1; r < d; ++r)
             if (std::abs(J[r * d + k]) > std::abs(J[piv * d + k])) piv = r;
           for (std::size_t c = 0; c < d; ++c) std::swap(J[k * d + c], J[piv * d + c]);
           logdet += std::log(std::abs(J[k * d + k]));
           for (std::size_t r = k + 1; r < d; ++r) {
             const double f = J[r * d + k] / J[k * d + k];
             for (std::size_t c = k; c < d; ++c) J[r * d + c] -= f * J[k * d + c];
           }
         }
         const double analytic = hyperspherical_jacobian_logdet(p);
         const double rel = std::abs(analytic - logdet) / std::abs(analytic);
         expect(rel < 1e-4, "relative error " + show(rel));
         return "relative error " + show(rel);
       }},
      {"elbo_gradcheck",
       [seed] {
         Rng init = Rng(seed).split("selftest:init");
         VariationalNetwork net({3, {4}, 2, 1, HeadMode::single}, PosteriorFamily::radial(), -1.0, init);
         Rng data = Rng(seed).split("selftest:data");
         const Tensor x = gaussian(data, {5, 3});
         const std::vector<std::size_t> y{0, 1, 1, 0, 1};
         const Prior prior = unit_prior(net);
         Rng noise_rng = Rng(seed).split("selftest:noise");
         const std::vector<NetworkNoise> noise{net.draw_noise(noise_rng, 0), net.draw_noise(noise_rng, 0)};
         ElboOptions o;
         o.n_samples = 2;
         o.dataset_size = 50;
         auto leaves = net.parameters(0);
         const double err = gradcheck(
             [&] { return elbo_loss_with_noise(net, x, y, prior, 0, o, noise).loss; }, leaves);
         expect(err < 1e-6, "max relative error " + show(err));
         return "max relative error " + show(err);
       }},
      {"sgd_step",
       [] {
         Tensor x = Tensor::scalar(1.0, true);
         SgdNesterov opt({x}, SgdNesterovSpec{0.1, 0.0, 1.0});
         (x * x).backward();
         opt.step();
         expect(std::abs(x.item() - 0.8) < 1e-15, "x " + show(x.item()));
         return show(x.item());
       }},
      {"snapshot_round_trip",
       [seed] {
         Rng init = Rng(seed).split("selftest:snap");
         const VariationalNetwork net({2, {3}, 2, 2, HeadMode::multi}, PosteriorFamily::mfvi(), -3.0, init);
         const PosteriorSnapshot s = snapshot(net, seed);
         expect(PosteriorSnapshot::deserialize(s.serialize()) == s, "round trip differs");
         return std::to_string(s.serialize().size()) + " bytes";
       }},
      {"config_echo_round_trip",
       [] {
         ExperimentConfig c;
         c.set("family", "mfvi");
         c.set("hidden", "8,8");
         const std::string e = c.echo();
         expect(ExperimentConfig::from_text(e).echo() == e, "echo differs after reparse");
         return std::to_string(ExperimentConfig::known_keys().size()) + " keys";
       }},
  };
}

}  // namespace

CommandOutput selftest(const CommandContext& ctx) {
  CsvTable csv({"check", "passed", "detail"});
  CommandOutput out;
  std::size_t failed = 0;
  for (const auto& c : checks(ctx.cfg.seed)) {
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    if (!ok) ++failed;
    ctx.say((ok ? "[pass] " : "[FAIL] ") + c.name + ": " + detail);
    csv.row({c.name, ok ? "1" : "0", detail});
  }
  out.ok = failed == 0;
  out.notes["failed"] = failed;
  out.files = {{"selftest.csv", csv.str()}};
  return out;
}

}  // namespace radial::cli
