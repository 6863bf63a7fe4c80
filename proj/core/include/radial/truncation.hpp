#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "radial/config.hpp"

namespace radial {

struct TruncationRow {
  double threshold = std::numeric_limits<double>::infinity();  ///< inf is the untruncated baseline
  std::size_t n_samples = 1;
  std::size_t repeats = 0;
  /// Final training-set NLL (dataset sum) under the noise the run trained with,
  /// averaged over repeats.
  double final_nll = 0.0;
  /// The same networks evaluated with untruncated Gaussian noise.
  double final_nll_untruncated = 0.0;
  double baseline_nll = 0.0;  ///< final_nll of the matching baseline
  double gap = 0.0;           ///< baseline_nll - final_nll
  double acceptance = 1.0;    ///< fraction of proposals kept by the truncated sampler
};

struct TruncationTable {
  std::vector<TruncationRow> rows;
};

/// MFVI at sigma = cfg.truncation_sigma, trained once per (threshold,
/// n_samples, repeat). Noise truncation only enters the NLL term; the KL
/// stays analytic. Repeat r uses seed cfg.seed + r for every threshold.
TruncationTable train_truncated(const ExperimentConfig& cfg);

}  // namespace radial
