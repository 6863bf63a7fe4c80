#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "radial/rng.hpp"
#include "radial/tensor.hpp"

namespace radial {

/// Row-major feature matrix with integer class labels.
struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;  ///< size() x dim
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  Tensor inputs() const;
  Tensor inputs(std::span<const std::size_t> rows) const;
  std::vector<std::size_t> labels_at(std::span<const std::size_t> rows) const;
  Dataset subset(std::span<const std::size_t> rows) const;
  /// First min(n, size()) rows.
  Dataset head(std::size_t n) const;
  /// Throws std::invalid_argument when shapes disagree or a label is out of range.
  void validate() const;
};

/// Isotropic Gaussian clusters, one per class, centers on a circle of
/// `radius` in the first two coordinates.
Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t dim, double spread,
                   double radius, Rng& rng);

/// Two interleaved half circles with Gaussian jitter `noise`; a `label_noise`
/// fraction of labels is flipped.
Dataset make_moons(std::size_t n, double noise, double label_noise, Rng& rng);

/// Binary set on [-1, 1]^2 labelled by the sign of x0, except that points
/// with |x0| < band get a coin-flip label. `ambiguous` marks those points.
struct AmbiguousBand {
  Dataset data;
  std::vector<bool> ambiguous;
};
AmbiguousBand make_ambiguous_band(std::size_t n, double band, Rng& rng);

/// `classes` Gaussian clusters in `dim` dimensions with random unit-scale
/// centers; `spread` controls overlap. Used for split-task sequences.
Dataset make_clusters(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                      double spread, Rng& rng);

struct TrainVal {
  Dataset train;
  Dataset val;
};

/// Random split holding out `val_fraction` of the rows.
TrainVal split_validation(const Dataset& data, double val_fraction, Rng& rng);

/// Per-feature mean and std fitted on one set and applied to others.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& data);
  void apply(Dataset& data) const;
};

/// Dataset whose classes are a subset of another's, relabelled 0..k-1.
struct Task {
  std::vector<std::size_t> classes;  ///< original labels, in local-label order
  Dataset train;
  Dataset test;
};

struct TaskSequence {
  std::vector<Task> tasks;
};

/// Consecutive class groups (0,1), (2,3), ... Each task is standardized by
/// its own training statistics. With `local_labels` the labels inside each
/// task are 0..k-1; otherwise original labels are kept.
TaskSequence split_tasks(const Dataset& train, const Dataset& test, std::size_t classes_per_task,
                         bool local_labels);

/// Shuffled index order for one epoch.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace radial
