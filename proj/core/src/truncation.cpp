#include "radial/truncation.hpp"

#include <cmath>
#include <stdexcept>

#include "radial/stats.hpp"
#include "radial/train.hpp"

namespace radial {

namespace {

struct RunSummary {
  double nll = 0.0;
  double nll_untruncated = 0.0;
};

RunSummary run_once(const ExperimentConfig& base, double threshold, std::size_t n_samples,
                    std::size_t repeat) {
  ExperimentConfig cfg = base;
  cfg.seed = base.seed + repeat;
  cfg.family = PosteriorFamily::truncated(threshold);
  cfg.rho_init = rho_from_sigma(base.truncation_sigma);
  cfg.n_samples = n_samples;
  cfg.grad_std_draws = 0;

  TrainData data = make_train_data(cfg);
  Rng rng(cfg.seed);
  Rng init = rng.split("init");
  VariationalNetwork net(architecture_for(cfg, data.train.dim, data.train.classes), cfg.family,
                         cfg.rho_init, init);
  const Prior prior = unit_prior(net);
  TrainSession session;
  session.cfg = &cfg;
  session.prior = &prior;
  session.train = &data.train;
  session.epochs = cfg.epochs;
  session.track = false;
  train_network(net, session, rng);

  RunSummary s;
  Rng eval = rng.split("truncation-eval");
  s.nll = evaluate(net, data.train, 0, cfg.test_samples, eval).nll_sum;
  net.set_family(PosteriorFamily::mfvi());
  Rng eval_plain = rng.split("truncation-eval-untruncated");
  s.nll_untruncated = evaluate(net, data.train, 0, cfg.test_samples, eval_plain).nll_sum;
  return s;
}

double acceptance_rate(double threshold) {
  if (std::isinf(threshold)) return 1.0;
  return 2.0 * stats::normal_cdf(threshold) - 1.0;
}

}  // namespace

TruncationTable train_truncated(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.truncation_repeats == 0) throw std::invalid_argument("truncation_repeats must be positive");
  if (cfg.truncation_samples.empty()) throw std::invalid_argument("truncation_samples is empty");
  for (double c : cfg.truncation_thresholds)
    if (!(c > 0.0)) throw std::invalid_argument("truncation thresholds must be positive");

  TruncationTable table;
  const double r = static_cast<double>(cfg.truncation_repeats);
  for (std::size_t s : cfg.truncation_samples) {
    std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
    thresholds.insert(thresholds.end(), cfg.truncation_thresholds.begin(), cfg.truncation_thresholds.end());
    double baseline = 0.0;
    for (double c : thresholds) {
      TruncationRow row;
      row.threshold = c;
      row.n_samples = s;
      row.repeats = cfg.truncation_repeats;
      row.acceptance = acceptance_rate(c);
      for (std::size_t rep = 0; rep < cfg.truncation_repeats; ++rep) {
        const RunSummary sum = run_once(cfg, c, s, rep);
        row.final_nll += sum.nll / r;
        row.final_nll_untruncated += sum.nll_untruncated / r;
      }
      if (std::isinf(c)) baseline = row.final_nll;
      row.baseline_nll = baseline;
      row.gap = baseline - row.final_nll;
      table.rows.push_back(row);
    }
  }
  return table;
}

}  // namespace radial
