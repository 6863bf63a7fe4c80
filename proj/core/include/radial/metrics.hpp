#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "radial/rng.hpp"
#include "radial/tensor.hpp"

namespace radial {

/// Per-sample class probabilities, laid out [samples x batch x classes].
struct ProbSamples {
  std::size_t samples = 0;
  std::size_t batch = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double at(std::size_t s, std::size_t b, std::size_t k) const {
    return values[(s * batch + b) * classes + k];
  }
};

/// Softmax of logits [S x B x K].
ProbSamples softmax_samples(const Tensor& logits);
/// Throws std::invalid_argument if any row sums away from 1 by more than tol.
void check_normalized(const ProbSamples& p, double tol = 1e-6);

/// Mean over samples, [batch x classes] row-major.
std::vector<double> mean_predictive(const ProbSamples& p);
std::vector<std::size_t> predicted_labels(const ProbSamples& p);
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// H(mean_s p_s) - mean_s H(p_s) per example, nats, clamped at 0.
std::vector<double> predictive_mutual_information(const ProbSamples& p);
/// H(mean_s p_s) per example.
std::vector<double> predictive_entropy(const ProbSamples& p);

/// Probability that a random positive outranks a random negative, ties
/// counted one half. Labels must be 0 or 1 with both present.
double roc_auc(std::span<const double> scores, std::span<const std::size_t> labels);

enum class UncertaintyMeasure { mutual_information, predictive_entropy };
std::string_view to_string(UncertaintyMeasure m);
UncertaintyMeasure parse_uncertainty(std::string_view name);

inline constexpr std::array<double, 4> kDefaultReferralFractions{0.0, 0.1, 0.2, 0.3};

struct ReferralPoint {
  double fraction = 0.0;
  std::size_t referred = 0;
  std::size_t retained = 0;
  std::optional<double> auc;  ///< empty when the retained set is single-class
};

/// Drops the ceil(f n) most uncertain points (stable order among ties) and
/// scores the rest.
std::vector<ReferralPoint> referral_sweep(std::span<const double> uncertainties,
                                          std::span<const double> scores,
                                          std::span<const std::size_t> labels,
                                          std::span<const double> fractions = kDefaultReferralFractions);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct CalibrationTable {
  std::array<CalibrationBin, 10> bins;
  std::size_t total = 0;
};

/// Bins the mean predictive probability of the predicted class.
CalibrationTable calibration_table(const ProbSamples& p, std::span<const std::size_t> labels);
double ece(const CalibrationTable& table);

struct BootstrapResult {
  double estimate = 0.0;
  double standard_error = 0.0;
  std::size_t replicates = 0;
};

/// Resamples indices [0, n) with replacement and reports the spread of
/// `statistic`. Replicates on which `statistic` throws are skipped.
BootstrapResult bootstrap(std::size_t n,
                          const std::function<double(std::span<const std::size_t>)>& statistic,
                          std::size_t replicates, Rng& rng);

}  // namespace radial
