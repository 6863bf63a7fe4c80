#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "radial/layers.hpp"

namespace radial {

struct GradVarianceRow {
  double sigma = 0.0;
  double std = 0.0;       ///< mean over parameters of the across-seed std
  double variance = 0.0;  ///< mean over parameters of the across-seed variance
  std::size_t n_seeds = 0;
  std::size_t d = 0;  ///< parameters in the probed layer
};

struct GradVarianceReport {
  std::vector<double> sigma_grid;
  std::vector<GradVarianceRow> rows;
  std::size_t n_seeds = 0;
  std::size_t d = 0;
  Family family = Family::mfvi;
  std::string protocol;  ///< human-readable description of the estimator
};

/// Single-sample NLL-gradient spread for one trunk layer's means.
///
/// `net` is copied, switched to `family` and every sigma set to `sigma`. Each
/// seed draws one noise sample for the whole network (from rng.split(seed
/// index)) and backpropagates the mean softmax NLL on the fixed batch.
GradVarianceRow grad_variance_probe(const VariationalNetwork& net, std::size_t layer,
                                    double sigma, std::size_t n_seeds, PosteriorFamily family,
                                    const Tensor& x, std::span<const std::size_t> labels,
                                    const Rng& rng);

/// Runs the probe across a strictly increasing sigma grid.
GradVarianceReport grad_variance_sweep(const VariationalNetwork& net, std::size_t layer,
                                       std::span<const double> sigma_grid, std::size_t n_seeds,
                                       PosteriorFamily family, const Tensor& x,
                                       std::span<const std::size_t> labels, const Rng& rng);

/// Mean over all mean parameters of the active layers of the std across k
/// single-sample NLL gradients at the current parameters.
double nll_gradient_std(const VariationalNetwork& net, const Tensor& x,
                        std::span<const std::size_t> labels, std::size_t head, std::size_t k,
                        Rng& rng);

}  // namespace radial
