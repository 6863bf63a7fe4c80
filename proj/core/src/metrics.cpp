#include "radial/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace radial {

namespace {

double entropy_of(const double* p, std::size_t k) {
  double h = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
  return h;
}

}  // namespace

ProbSamples softmax_samples(const Tensor& logits) {
  if (logits.dim() != 3)
    throw ShapeError("softmax_samples: expected [samples x batch x classes], got " +
                     shape_to_string(logits.shape()));
  ProbSamples p{logits.size(0), logits.size(1), logits.size(2), {}};
  const auto L = logits.data();
  p.values.resize(L.size());
  const std::size_t k = p.classes;
  for (std::size_t r = 0; r < p.samples * p.batch; ++r) {
    const double* x = L.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (p.values[r * k + j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < k; ++j) p.values[r * k + j] /= s;
  }
  return p;
}

void check_normalized(const ProbSamples& p, double tol) {
  if (p.values.size() != p.samples * p.batch * p.classes)
    throw ShapeError("ProbSamples: value count does not match its shape");
  for (std::size_t r = 0; r < p.samples * p.batch; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.classes; ++j) {
      const double v = p.values[r * p.classes + j];
      if (v < -tol) throw std::invalid_argument("probability row " + std::to_string(r) + " has a negative entry");
      s += v;
    }
    if (std::abs(s - 1.0) > tol)
      throw std::invalid_argument("probability row " + std::to_string(r) + " sums to " +
                                  std::to_string(s));
  }
}

std::vector<double> mean_predictive(const ProbSamples& p) {
  std::vector<double> m(p.batch * p.classes, 0.0);
  const double w = 1.0 / static_cast<double>(p.samples);
  for (std::size_t s = 0; s < p.samples; ++s)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += w * p.values[s * m.size() + i];
  return m;
}

std::vector<std::size_t> predicted_labels(const ProbSamples& p) {
  const auto m = mean_predictive(p);
  std::vector<std::size_t> out(p.batch);
  for (std::size_t b = 0; b < p.batch; ++b) {
    const double* row = m.data() + b * p.classes;
    out[b] = static_cast<std::size_t>(std::max_element(row, row + p.classes) - row);
  }
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size() || labels.empty())
    throw std::invalid_argument("accuracy: need equal, non-empty label lists");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

std::vector<double> predictive_entropy(const ProbSamples& p) {
  check_normalized(p);
  const auto m = mean_predictive(p);
  std::vector<double> out(p.batch);
  for (std::size_t b = 0; b < p.batch; ++b) out[b] = entropy_of(m.data() + b * p.classes, p.classes);
  return out;
}

std::vector<double> predictive_mutual_information(const ProbSamples& p) {
  auto out = predictive_entropy(p);
  const double w = 1.0 / static_cast<double>(p.samples);
  for (std::size_t b = 0; b < p.batch; ++b) {
    double expected = 0.0;
    for (std::size_t s = 0; s < p.samples; ++s)
      expected += w * entropy_of(p.values.data() + (s * p.batch + b) * p.classes, p.classes);
    out[b] = std::max(0.0, out[b] - expected);
  }
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(labels.size()) + " labels");
  std::size_t pos = 0;
  for (std::size_t y : labels) {
    if (y > 1) throw std::invalid_argument("roc_auc: labels must be 0 or 1");
    pos += y;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes must be present");

  // Mann-Whitney U from average ranks.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j + 1);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] == 1) positive_rank_sum += rank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::string_view to_string(UncertaintyMeasure m) {
  return m == UncertaintyMeasure::mutual_information ? "mutual_information" : "predictive_entropy";
}

UncertaintyMeasure parse_uncertainty(std::string_view name) {
  if (name == "mutual_information" || name == "mi") return UncertaintyMeasure::mutual_information;
  if (name == "predictive_entropy" || name == "entropy") return UncertaintyMeasure::predictive_entropy;
  throw std::invalid_argument("unknown uncertainty measure '" + std::string(name) + "'");
}

std::vector<ReferralPoint> referral_sweep(std::span<const double> uncertainties,
                                          std::span<const double> scores,
                                          std::span<const std::size_t> labels,
                                          std::span<const double> fractions) {
  const std::size_t n = labels.size();
  if (uncertainties.size() != n || scores.size() != n)
    throw std::invalid_argument("referral_sweep: inputs differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return uncertainties[a] > uncertainties[b];
  });

  std::vector<ReferralPoint> out;
  for (double f : fractions) {
    if (!(f >= 0.0 && f < 1.0))
      throw std::invalid_argument("referral_sweep: fraction " + std::to_string(f) + " outside [0, 1)");
    // The small slack keeps products like 0.3 * 10 from rounding up a point.
    const auto referred = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
    ReferralPoint pt{f, referred, n - referred, std::nullopt};
    std::vector<double> kept_scores;
    std::vector<std::size_t> kept_labels;
    for (std::size_t i = referred; i < n; ++i) {
      kept_scores.push_back(scores[order[i]]);
      kept_labels.push_back(labels[order[i]]);
    }
    const auto positives = std::count(kept_labels.begin(), kept_labels.end(), std::size_t{1});
    if (positives > 0 && static_cast<std::size_t>(positives) < kept_labels.size())
      pt.auc = roc_auc(kept_scores, kept_labels);
    out.push_back(pt);
  }
  return out;
}

CalibrationTable calibration_table(const ProbSamples& p, std::span<const std::size_t> labels) {
  if (labels.size() != p.batch)
    throw std::invalid_argument("calibration_table: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(p.batch) + " predictions");
  const auto m = mean_predictive(p);
  CalibrationTable t;
  std::array<double, 10> conf_sum{}, hit_sum{};
  for (std::size_t b = 0; b < p.batch; ++b) {
    const double* row = m.data() + b * p.classes;
    const auto pred = static_cast<std::size_t>(std::max_element(row, row + p.classes) - row);
    const double conf = row[pred];
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(std::floor(conf * 10.0)));
    conf_sum[bin] += conf;
    hit_sum[bin] += pred == labels[b] ? 1.0 : 0.0;
    ++t.bins[bin].count;
  }
  for (std::size_t i = 0; i < 10; ++i) {
    auto& bin = t.bins[i];
    bin.lower = static_cast<double>(i) / 10.0;
    bin.upper = static_cast<double>(i + 1) / 10.0;
    if (bin.count > 0) {
      bin.mean_confidence = conf_sum[i] / static_cast<double>(bin.count);
      bin.accuracy = hit_sum[i] / static_cast<double>(bin.count);
    }
  }
  t.total = p.batch;
  return t;
}

double ece(const CalibrationTable& table) {
  std::size_t total = 0;
  for (const auto& b : table.bins) total += b.count;
  if (total == 0) return 0.0;
  double e = 0.0;
  for (const auto& b : table.bins)
    e += static_cast<double>(b.count) / static_cast<double>(total) *
         std::abs(b.accuracy - b.mean_confidence);
  return e;
}

BootstrapResult bootstrap(std::size_t n,
                          const std::function<double(std::span<const std::size_t>)>& statistic,
                          std::size_t replicates, Rng& rng) {
  if (n == 0 || replicates < 2) throw std::invalid_argument("bootstrap: need n >= 1 and >= 2 replicates");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  BootstrapResult r;
  r.estimate = statistic(all);
  std::vector<double> values;
  std::vector<std::size_t> idx(n);
  for (std::size_t rep = 0; rep < replicates; ++rep) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    try {
      values.push_back(statistic(idx));
    } catch (const std::invalid_argument&) {
      // e.g. a single-class resample for AUC
    }
  }
  r.replicates = values.size();
  if (values.size() >= 2) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    r.standard_error = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

}  // namespace radial
