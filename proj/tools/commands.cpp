#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "radial/continual.hpp"
#include "radial/elbo.hpp"
#include "radial/grad_probe.hpp"
#include "radial/metrics.hpp"
#include "radial/noise.hpp"
#include "radial/records.hpp"
#include "radial/snapshot.hpp"
#include "radial/stats.hpp"
#include "radial/train.hpp"
#include "radial/truncation.hpp"

namespace radial::cli {

namespace {

using std::to_string;

std::string num(double v) { return csv_number(v); }
std::string num(std::size_t v) { return to_string(v); }
std::string flag(bool b) { return b ? "1" : "0"; }

double euclidean_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> density;

  double width() const { return (hi - lo) / static_cast<double>(density.size()); }
  double lower(std::size_t b) const { return lo + width() * static_cast<double>(b); }
  double center(std::size_t b) const { return lower(b) + 0.5 * width(); }
};

/// Density histogram; values outside [lo, hi) count toward n but no bin.
Histogram histogram(std::span<const double> xs, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram: need bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  for (double x : xs) {
    if (x < lo || x >= hi) continue;
    const auto b = std::min(bins - 1, static_cast<std::size_t>((x - lo) / h.width()));
    h.density[b] += 1.0;
  }
  for (double& c : h.density) c /= static_cast<double>(xs.size()) * h.width();
  return h;
}

/// Mean of sigma * chi_d.
double chi_mean(std::size_t d, double sigma) {
  const double k = static_cast<double>(d);
  return sigma * std::sqrt(2.0) * std::exp(std::lgamma((k + 1.0) / 2.0) - std::lgamma(k / 2.0));
}

/// Trains from the config or restores a saved model, and returns it with the
/// configured test split.
struct ModelAndData {
  VariationalNetwork net;
  Dataset test;
};

ModelAndData model_and_data(const CommandContext& ctx, const ModelOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (!opt.model.empty()) {
    ctx.say("loading model " + opt.model);
    VariationalNetwork net = restore_network(PosteriorSnapshot::load(opt.model));
    TrainData data = make_train_data(cfg);
    if (net.architecture().input_dim != data.test.dim || net.architecture().output_dim != data.test.classes)
      throw std::invalid_argument("model expects " + to_string(net.architecture().input_dim) + " inputs and " +
                                  to_string(net.architecture().output_dim) + " classes, dataset has " +
                                  to_string(data.test.dim) + " and " + to_string(data.test.classes));
    return {std::move(net), std::move(data.test)};
  }
  ctx.say("training " + std::string(to_string(cfg.family.kind)) + " model for " + to_string(cfg.epochs) +
          " epochs");
  RunOutput run = run_training(cfg);
  return {std::move(run.net), std::move(run.data.test)};
}

}  // namespace

double sphere_mean_chord(std::size_t d) {
  if (d < 1) throw std::invalid_argument("sphere_mean_chord: d must be >= 1");
  if (d == 1) return 1.0;  // two points {-1, 1}: distance 0 or 2
  const double k = static_cast<double>(d);
  return std::exp(2.0 * std::lgamma(k / 2.0) + (k - 1.0) * std::log(2.0) - 0.5 * std::log(std::numbers::pi) -
                  std::lgamma(k - 0.5));
}

CommandOutput soap_bubble(const CommandContext& ctx, const SoapBubbleOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto dims = opt.dims.empty() ? cfg.dims : opt.dims;
  const std::size_t n = opt.samples ? opt.samples : cfg.mc_samples;
  const std::size_t bins = opt.bins ? opt.bins : cfg.bins;
  const double sigma = opt.sigma;
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (n < 2) throw std::invalid_argument("need at least 2 samples");
  const Rng base(cfg.seed);

  CsvTable curves({"family", "d", "sigma", "bin_lower", "bin_upper", "bin_center", "mc_density", "analytic_pdf"});
  CsvTable summary({"family", "d", "sigma", "samples", "mean_radius", "sd_radius", "cv", "analytic_mean",
                    "ks_statistic", "ks_critical_0.01", "ks_pass"});
  CommandOutput out;
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("dimension must be positive");
    ctx.say("soap-bubble d=" + to_string(d));
    std::vector<double> buf(d);
    for (const char* family : {"mfvi", "radial"}) {
      const bool radial = std::string_view(family) == "radial";
      Rng rng = base.split("soap:" + std::string(family) + ":" + to_string(d));
      std::vector<double> radii(n);
      for (auto& r : radii) {
        radial ? fill_radial_noise(rng, buf) : fill_mfvi_noise(rng, buf);
        r = sigma * euclidean_norm(buf);
      }
      const double k = static_cast<double>(d);
      std::function<double(double)> cdf, pdf;
      double analytic_mean = 0.0, lo = 0.0, hi = 0.0;
      if (radial) {
        cdf = [sigma](double r) { return stats::half_normal_cdf(r / sigma); };
        pdf = [sigma](double r) { return stats::half_normal_pdf(r / sigma) / sigma; };
        analytic_mean = sigma * std::sqrt(2.0 / std::numbers::pi);
        hi = 4.0 * sigma;
      } else {
        cdf = [sigma, k](double r) { return r <= 0.0 ? 0.0 : boost::math::gamma_p(k / 2.0, r * r / (2 * sigma * sigma)); };
        pdf = [sigma, d](double r) { return radius_pdf(r, d, sigma); };
        analytic_mean = chi_mean(d, sigma);
        lo = std::max(0.0, analytic_mean - 6.0 * sigma);
        hi = analytic_mean + 6.0 * sigma;
      }
      const Histogram h = histogram(radii, lo, hi, bins);
      for (std::size_t b = 0; b < bins; ++b)
        curves.row({family, num(d), num(sigma), num(h.lower(b)), num(h.lower(b) + h.width()), num(h.center(b)),
                    num(h.density[b]), num(pdf(h.center(b)))});
      const double mean = stats::mean(radii);
      const double sd = stats::stddev(radii);
      const double ks = stats::ks_statistic(radii, cdf);
      const double crit = stats::ks_critical_value(n, 0.01);
      summary.row({family, num(d), num(sigma), num(n), num(mean), num(sd), num(sd / mean), num(analytic_mean),
                   num(ks), num(crit), flag(ks < crit)});
    }
  }

  CsvTable pairs({"d", "points", "mean_distance", "exact_mean", "large_d_limit", "relative_error"});
  for (std::size_t d : opt.pair_dims) {
    if (d < 2) throw std::invalid_argument("pairwise dimensions must be >= 2");
    Rng rng = base.split("pairs:" + to_string(d));
    std::vector<std::vector<double>> pts(opt.pair_points, std::vector<double>(d));
    for (auto& p : pts) {
      fill_mfvi_noise(rng, p);
      const double r = euclidean_norm(p);
      for (double& x : p) x /= r;
    }
    const double m = mean_pairwise_distance(pts);
    const double exact = sphere_mean_chord(d);
    pairs.row({num(d), num(opt.pair_points), num(m), num(exact), num(std::sqrt(2.0)), num((m - exact) / exact)});
  }

  out.files = {{"soap_bubble.csv", curves.str()},
               {"soap_bubble_summary.csv", summary.str()},
               {"pairwise_distance.csv", pairs.str()}};
  out.notes["sigma"] = sigma;
  out.notes["samples"] = n;
  out.notes["ks_alpha"] = 0.01;
  return out;
}

CommandOutput marginal(const CommandContext& ctx, const MarginalOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto dims = opt.dims.empty() ? cfg.dims : opt.dims;
  const std::size_t n = opt.samples ? opt.samples : cfg.mc_samples;
  const std::size_t bins = opt.bins ? opt.bins : cfg.bins;
  if (n < 4) throw std::invalid_argument("need at least 4 samples");
  const Rng base(cfg.seed);

  CsvTable hist({"d", "bin_lower", "bin_upper", "bin_center", "mfvi_density", "radial_density", "normal_pdf"});
  CsvTable summary({"family", "d", "samples", "mean", "variance", "analytic_variance", "excess_kurtosis"});
  for (std::size_t d : dims) {
    if (d == 0) throw std::invalid_argument("dimension must be positive");
    ctx.say("marginal d=" + to_string(d));
    std::vector<double> buf(d), mfvi(n), rad(n);
    Rng rm = base.split("marginal:mfvi:" + to_string(d));
    Rng rr = base.split("marginal:radial:" + to_string(d));
    for (std::size_t i = 0; i < n; ++i) {
      fill_mfvi_noise(rm, buf);
      mfvi[i] = buf[0];
      fill_radial_noise(rr, buf);
      rad[i] = buf[0];
    }
    const double spread = 5.0 * std::max(stats::stddev(mfvi), stats::stddev(rad));
    const Histogram hm = histogram(mfvi, -spread, spread, bins);
    const Histogram hr = histogram(rad, -spread, spread, bins);
    for (std::size_t b = 0; b < bins; ++b)
      hist.row({num(d), num(hm.lower(b)), num(hm.lower(b) + hm.width()), num(hm.center(b)), num(hm.density[b]),
                num(hr.density[b]), num(stats::normal_pdf(hm.center(b)))});
    summary.row({"mfvi", num(d), num(n), num(stats::mean(mfvi)), num(stats::variance(mfvi)), num(1.0),
                 num(stats::excess_kurtosis(mfvi))});
    summary.row({"radial", num(d), num(n), num(stats::mean(rad)), num(stats::variance(rad)),
                 num(1.0 / static_cast<double>(d)), num(stats::excess_kurtosis(rad))});
  }
  CommandOutput out;
  out.files = {{"marginal.csv", hist.str()}, {"marginal_summary.csv", summary.str()}};
  out.notes["samples"] = n;
  out.notes["coordinate"] = "first coordinate of each d-dimensional noise draw";
  return out;
}

CommandOutput grad_variance(const CommandContext& ctx, const GradVarianceOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  const auto& w = cfg.probe_widths;
  if (w.size() < 3) throw std::invalid_argument("probe_widths needs input, at least one hidden and output width");
  Architecture arch{w.front(), std::vector<std::size_t>(w.begin() + 1, w.end() - 1), w.back(), 1,
                    HeadMode::single};
  if (opt.layer >= arch.hidden.size())
    throw std::invalid_argument("probe layer " + to_string(opt.layer) + " is not a trunk layer");

  const Rng base(cfg.seed);
  Rng data = base.split("probe-data");
  const Tensor x = gaussian(data, {cfg.probe_batch, arch.input_dim});
  std::vector<std::size_t> labels(cfg.probe_batch);
  for (auto& y : labels) y = data.below(arch.output_dim);
  Rng init = base.split("init");
  const VariationalNetwork net(arch, cfg.family, cfg.rho_init, init);

  CsvTable rows({"family", "sigma", "std", "variance", "n_seeds", "d"});
  CsvTable summary({"family", "d", "sigma_low", "std_low", "sigma_high", "std_high", "ratio_high_low",
                    "ratio_1_vs_0.1", "crossing_10x"});
  std::string protocol;
  for (const auto& name : opt.families) {
    const Family kind = parse_family(name);
    const PosteriorFamily family = kind == Family::truncated_mfvi ? PosteriorFamily::truncated(cfg.family.truncation)
                                                                  : PosteriorFamily{kind};
    ctx.say("grad-variance " + name);
    const GradVarianceReport rep = grad_variance_sweep(net, opt.layer, cfg.sigma_grid, cfg.probe_seeds, family, x,
                                                       labels, base.split("probe"));
    protocol = rep.protocol;
    std::optional<double> at01, at1, crossing;
    for (const auto& r : rep.rows) {
      rows.row({name, num(r.sigma), num(r.std), num(r.variance), num(r.n_seeds), num(r.d)});
      if (std::abs(r.sigma - 0.1) < 1e-12) at01 = r.std;
      if (std::abs(r.sigma - 1.0) < 1e-12) at1 = r.std;
      if (!crossing && r.std > 10.0 * rep.rows.front().std) crossing = r.sigma;
    }
    const auto& lo = rep.rows.front();
    const auto& hi = rep.rows.back();
    std::optional<double> ratio;
    if (at01 && at1) ratio = *at1 / *at01;
    summary.row({name, num(rep.d), num(lo.sigma), num(lo.std), num(hi.sigma), num(hi.std), num(hi.std / lo.std),
                 csv_optional(ratio), csv_optional(crossing)});
  }
  CommandOutput out;
  out.files = {{"grad_variance.csv", rows.str()}, {"grad_variance_summary.csv", summary.str()}};
  out.notes["protocol"] = protocol;
  out.notes["probe_layer"] = opt.layer;
  out.notes["probe_batch"] = "standard normal inputs, uniformly random labels";
  return out;
}

CommandOutput train(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  ctx.say("training " + std::string(to_string(cfg.family.kind)) + " for " + to_string(cfg.epochs) + " epochs");
  RunOutput run = run_training(cfg);
  Rng rng = Rng(cfg.seed).split("summary:test");
  const EvalResult test = evaluate(run.net, run.data.test, 0, cfg.test_samples, rng);
  CsvTable summary({"run_id", "family", "epochs", "final_train_acc", "final_train_nll", "test_acc",
                    "rejected_steps", "best_epoch", "radial_prior_caveat"});
  summary.row({cfg.run_id, std::string(to_string(cfg.family.kind)), num(cfg.epochs), num(run.result.final_train_acc),
               num(run.result.final_train_nll), num(test.accuracy), num(run.result.rejected_steps),
               run.result.best_epoch ? num(*run.result.best_epoch) : std::string(),
               flag(run.result.radial_prior_caveat)});
  CommandOutput out;
  out.files = {{"metrics.csv", metrics_csv(run.result.records, 1)},
               {"train_summary.csv", summary.str()},
               {"model.snap", snapshot(run.net, cfg.seed).serialize()}};
  out.notes["radial_prior_caveat"] = run.result.radial_prior_caveat;
  out.notes["rejected_steps"] = run.result.rejected_steps;
  if (run.result.radial_prior_caveat)
    out.notes["caveat"] = "radial prior cross-entropy estimate omits the hyperspherical Jacobian";
  return out;
}

CommandOutput truncation(const CommandContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  ctx.say("truncation sweep: " + to_string(cfg.truncation_thresholds.size() + 1) + " thresholds x " +
          to_string(cfg.truncation_samples.size()) + " sample counts x " + to_string(cfg.truncation_repeats) +
          " repeats");
  const TruncationTable table = train_truncated(cfg);
  CsvTable csv({"threshold", "n_samples", "repeats", "final_nll", "final_nll_untruncated", "baseline_nll", "gap",
                "acceptance"});
  for (const auto& r : table.rows)
    csv.row({num(r.threshold), num(r.n_samples), num(r.repeats), num(r.final_nll), num(r.final_nll_untruncated),
             num(r.baseline_nll), num(r.gap), num(r.acceptance)});
  CommandOutput out;
  out.files = {{"truncation.csv", csv.str()}};
  out.notes["sigma_init"] = cfg.truncation_sigma;
  out.notes["final_nll"] = "training-set NLL sum under the noise each run trained with";
  return out;
}

CommandOutput continual(const CommandContext& ctx, const ContinualOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  std::vector<std::string> modes = opt.head_modes;
  if (modes.empty()) modes.emplace_back(to_string(cfg.head_mode));
  std::vector<std::string> families = opt.families;
  if (families.empty()) families.emplace_back(to_string(cfg.family.kind));

  CsvTable acc({"head_mode", "family", "after_task", "task", "accuracy", "radial_prior_caveat"});
  CsvTable avg({"head_mode", "family", "after_task", "average", "val_average", "radial_prior_caveat"});
  CsvTable grid({"head_mode", "family", "epochs", "batch_size", "lr", "final_val_average", "selected"});
  std::string metrics;
  bool caveat = false;
  std::size_t n_tasks = 0;
  for (const auto& m : modes) {
    for (const auto& f : families) {
      ExperimentConfig c = cfg;
      c.head_mode = parse_head_mode(m);
      const Family kind = parse_family(f);
      c.family = kind == Family::truncated_mfvi ? PosteriorFamily::truncated(cfg.family.truncation)
                                                : PosteriorFamily{kind};
      c.run_id = cfg.run_id + ":" + f + ":" + m;
      const auto tasks = make_continual_tasks(c);
      if (n_tasks && tasks.size() != n_tasks) throw std::logic_error("task count changed between runs");
      n_tasks = tasks.size();
      ctx.say("continual " + f + " " + m + "-head: " + to_string(tasks.size()) + " tasks, " +
              to_string(expand_grid(c).size()) + " grid cells");
      const ContinualSearch search = continual_grid_search(c, tasks);
      const ContinualResult& r = search.result;
      caveat = caveat || r.radial_prior_caveat;
      const std::string cv = flag(r.radial_prior_caveat);
      for (std::size_t t = 0; t < r.accuracy.size(); ++t) {
        for (std::size_t j = 0; j <= t; ++j)
          acc.row({m, f, num(t), num(j), num(*r.accuracy[t][j]), cv});
        avg.row({m, f, num(t), num(r.average[t]), num(r.val_average[t]), cv});
      }
      for (std::size_t i = 0; i < search.cells.size(); ++i) {
        const auto& g = search.cells[i];
        grid.row({m, f, num(g.epochs), num(g.batch_size), num(g.lr), num(g.final_val_average), flag(i == search.best)});
      }
      if (metrics.empty()) metrics = metrics_csv_header(n_tasks) + '\n';
      for (const auto& rec : r.records) metrics += metrics_csv_row(rec, n_tasks) + '\n';
    }
  }
  CommandOutput out;
  out.files = {{"continual_accuracy.csv", acc.str()},
               {"continual_average.csv", avg.str()},
               {"continual_grid.csv", grid.str()},
               {"continual_metrics.csv", metrics}};
  out.notes["radial_prior_caveat"] = caveat;
  if (caveat) out.notes["caveat"] = "radial prior cross-entropy estimate omits the hyperspherical Jacobian";
  out.notes["selection"] = "grid cell with the best validation accuracy averaged over all tasks after the last task";
  return out;
}

CommandOutput calibrate(const CommandContext& ctx, const ModelOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  ModelAndData md = model_and_data(ctx, opt);
  Rng rng = Rng(cfg.seed).split("calibrate");
  const EvalResult ev = evaluate(md.net, md.test, 0, cfg.test_samples, rng);
  const CalibrationTable table = calibration_table(ev.probs, md.test.labels);
  CsvTable bins({"bin_lower", "bin_upper", "mean_confidence", "accuracy", "count"});
  for (const auto& b : table.bins)
    bins.row({num(b.lower), num(b.upper), b.count ? num(b.mean_confidence) : std::string(),
              b.count ? num(b.accuracy) : std::string(), num(b.count)});
  CsvTable summary({"n", "samples", "accuracy", "ece"});
  summary.row({num(table.total), num(cfg.test_samples), num(ev.accuracy), num(ece(table))});
  CommandOutput out;
  out.files = {{"calibration.csv", bins.str()}, {"calibration_summary.csv", summary.str()}};
  out.notes["confidence"] = "mean predictive probability of the predicted class";
  if (!opt.model.empty()) out.notes["model"] = opt.model;
  return out;
}

CommandOutput refer(const CommandContext& ctx, const ModelOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  ModelAndData md = model_and_data(ctx, opt);
  if (md.test.classes != 2) throw std::invalid_argument("refer needs a binary dataset");
  Rng rng = Rng(cfg.seed).split("refer");
  const EvalResult ev = evaluate(md.net, md.test, 0, cfg.test_samples, rng);
  const UncertaintyMeasure measure = parse_uncertainty(cfg.uncertainty);
  const std::vector<double> unc = measure == UncertaintyMeasure::mutual_information
                                      ? predictive_mutual_information(ev.probs)
                                      : predictive_entropy(ev.probs);
  const std::vector<double> mean = mean_predictive(ev.probs);
  std::vector<double> scores(md.test.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = mean[i * 2 + 1];
  const auto& fr = cfg.referral_fractions;
  const auto sweep = referral_sweep(unc, scores, md.test.labels, fr);

  CsvTable csv({"fraction", "referred", "retained", "auc", "auc_bootstrap_se"});
  Rng boot_rng = Rng(cfg.seed).split("refer:bootstrap");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& p = sweep[i];
    std::string se;
    if (p.auc) {
      const double f = fr[i];
      Rng r = boot_rng.split(i);
      const auto b = bootstrap(
          md.test.size(),
          [&](std::span<const std::size_t> idx) {
            std::vector<double> u, s;
            std::vector<std::size_t> y;
            for (std::size_t k : idx) {
              u.push_back(unc[k]);
              s.push_back(scores[k]);
              y.push_back(md.test.labels[k]);
            }
            const double one[] = {f};
            const auto pt = referral_sweep(u, s, y, one).front();
            if (!pt.auc) throw std::invalid_argument("single-class remainder");
            return *pt.auc;
          },
          200, r);
      se = num(b.standard_error);
    }
    csv.row({num(p.fraction), num(p.referred), num(p.retained), csv_optional(p.auc), se});
  }
  CommandOutput out;
  out.files = {{"referral.csv", csv.str()}};
  out.notes["uncertainty"] = std::string(to_string(measure));
  out.notes["tie_rule"] = "equal uncertainties are referred in input order";
  out.notes["bootstrap_replicates"] = 200;
  return out;
}

CommandOutput entropy_check(const CommandContext& ctx, const EntropyOptions& opt) {
  const ExperimentConfig& cfg = ctx.cfg;
  const std::size_t n = opt.samples ? opt.samples : cfg.mc_samples;
  const double euler = std::numbers::egamma;
  const Rng base(cfg.seed);
  CsvTable csv({"d", "quadrature", "closed_form", "abs_diff", "mc_mean", "mc_stderr", "mc_z", "gaussian_constant"});
  CommandOutput out;
  for (std::size_t d : opt.dims) {
    if (d < 2) throw std::invalid_argument("entropy-check dimensions must be >= 2");
    ctx.say("entropy constant d=" + to_string(d));
    const double k = static_cast<double>(d);
    const double quad = entropy_constant(d);
    const double log_area = log_unit_sphere_area(d);
    const double closed = 0.5 * std::log(2.0 / std::numbers::pi) - 0.5 - log_area +
                          (k - 1.0) * (euler + std::log(2.0)) / 2.0;
    Rng rng = base.split("entropy:" + to_string(d));
    std::vector<double> buf(d), logq(n);
    for (auto& v : logq) {
      fill_radial_noise(rng, buf);
      const double r = euclidean_norm(buf);
      v = std::log(2.0 * stats::normal_pdf(r)) - (k - 1.0) * std::log(r) - log_area;
    }
    const double mc = stats::mean(logq);
    const double se = stats::stddev(logq) / std::sqrt(static_cast<double>(n));
    const double z = (mc - quad) / se;
    const double diff = std::abs(quad - closed);
    out.ok = out.ok && diff <= 1e-8 * std::max(1.0, std::abs(closed)) && std::abs(z) < 5.0;
    csv.row({num(d), num(quad), num(closed), num(diff), num(mc), num(se), num(z), num(gaussian_entropy_constant(d))});
  }
  out.files = {{"entropy_check.csv", csv.str()}};
  out.notes["samples"] = n;
  out.notes["pass_rule"] = "abs_diff <= 1e-8 max(1, |closed_form|) and |mc_z| < 5";
  return out;
}

}  // namespace radial::cli
