#include "radial/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace radial {

Tensor Dataset::inputs() const { return Tensor::from_vector(features, {size(), dim}); }

Tensor Dataset::inputs(std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size() * dim);
  for (std::size_t r : rows) {
    if (r >= size()) throw std::out_of_range("Dataset: row " + std::to_string(r) + " out of range");
    out.insert(out.end(), features.begin() + static_cast<std::ptrdiff_t>(r * dim),
               features.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim));
  }
  return Tensor::from_vector(std::move(out), {rows.size(), dim});
}

std::vector<std::size_t> Dataset::labels_at(std::span<const std::size_t> rows) const {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels.at(r));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d{dim, classes, {}, labels_at(rows)};
  const Tensor x = inputs(rows);
  d.features.assign(x.data().begin(), x.data().end());
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> rows(std::min(n, size()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return subset(rows);
}

void Dataset::validate() const {
  if (dim == 0) throw std::invalid_argument("dataset has zero feature dimension");
  if (features.size() != labels.size() * dim)
    throw std::invalid_argument("dataset has " + std::to_string(features.size()) + " features for " +
                                std::to_string(labels.size()) + " rows of dimension " +
                                std::to_string(dim));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= classes)
      throw std::invalid_argument("dataset row " + std::to_string(i) + " has label " +
                                  std::to_string(labels[i]) + " but only " +
                                  std::to_string(classes) + " classes");
}

Dataset make_blobs(std::size_t n, std::size_t classes, std::size_t dim, double spread,
                   double radius, Rng& rng) {
  if (classes < 2 || dim < 2) throw std::invalid_argument("make_blobs: need >= 2 classes and dim >= 2");
  Dataset d{dim, classes, {}, {}};
  d.features.reserve(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    for (std::size_t j = 0; j < dim; ++j) {
      double center = 0.0;
      if (j == 0) center = radius * std::cos(angle);
      if (j == 1) center = radius * std::sin(angle);
      d.features.push_back(center + spread * rng.normal());
    }
    d.labels.push_back(c);
  }
  return d;
}

Dataset make_moons(std::size_t n, double noise, double label_noise, Rng& rng) {
  Dataset d{2, 2, {}, {}};
  d.features.reserve(2 * n);
  const std::size_t first = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = std::numbers::pi * rng.uniform();
    const bool upper = i < first;
    const double x = upper ? std::cos(t) : 1.0 - std::cos(t);
    const double y = upper ? std::sin(t) : 0.5 - std::sin(t);
    d.features.push_back(x + noise * rng.normal());
    d.features.push_back(y + noise * rng.normal());
    std::size_t label = upper ? 0 : 1;
    if (rng.uniform() < label_noise) label = 1 - label;
    d.labels.push_back(label);
  }
  return d;
}

AmbiguousBand make_ambiguous_band(std::size_t n, double band, Rng& rng) {
  AmbiguousBand out{{2, 2, {}, {}}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = 2.0 * rng.uniform() - 1.0;
    const double x1 = 2.0 * rng.uniform() - 1.0;
    const bool ambiguous = std::abs(x0) < band;
    const std::size_t coin = rng.uniform() < 0.5 ? 1 : 0;
    out.data.features.push_back(x0);
    out.data.features.push_back(x1);
    out.data.labels.push_back(ambiguous ? coin : (x0 > 0.0 ? 1 : 0));
    out.ambiguous.push_back(ambiguous);
  }
  return out;
}

Dataset make_clusters(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                      double spread, Rng& rng) {
  if (classes < 2 || dim == 0) throw std::invalid_argument("make_clusters: need >= 2 classes");
  std::vector<double> centers(classes * dim);
  for (double& c : centers) c = rng.normal();
  Dataset d{dim, classes, {}, {}};
  for (std::size_t i = 0; i < n_per_class * classes; ++i) {
    const std::size_t c = i % classes;
    for (std::size_t j = 0; j < dim; ++j) d.features.push_back(centers[c * dim + j] + spread * rng.normal());
    d.labels.push_back(c);
  }
  return d;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

TrainVal split_validation(const Dataset& data, double val_fraction, Rng& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("split_validation: fraction must be in (0, 1)");
  const auto order = permutation(data.size(), rng);
  const auto n_val = static_cast<std::size_t>(std::round(val_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return {data.subset(train), data.subset(val)};
}

Standardizer Standardizer::fit(const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("Standardizer: empty dataset");
  Standardizer s{std::vector<double>(data.dim, 0.0), std::vector<double>(data.dim, 0.0)};
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dim; ++j) s.mean[j] += data.features[i * data.dim + j] / n;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dim; ++j) {
      const double c = data.features[i * data.dim + j] - s.mean[j];
      s.scale[j] += c * c / n;
    }
  // Constant features (e.g. image borders) are centred but not rescaled.
  for (double& v : s.scale) v = v > 1e-24 ? std::sqrt(v) : 1.0;
  return s;
}

void Standardizer::apply(Dataset& data) const {
  if (data.dim != mean.size())
    throw std::invalid_argument("Standardizer: fitted on dimension " + std::to_string(mean.size()) +
                                ", applied to " + std::to_string(data.dim));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data.dim; ++j) {
      double& v = data.features[i * data.dim + j];
      v = (v - mean[j]) / scale[j];
    }
}

TaskSequence split_tasks(const Dataset& train, const Dataset& test, std::size_t classes_per_task,
                         bool local_labels) {
  if (classes_per_task == 0 || train.classes % classes_per_task != 0)
    throw std::invalid_argument("split_tasks: " + std::to_string(train.classes) +
                                " classes do not divide into groups of " +
                                std::to_string(classes_per_task));
  if (train.dim != test.dim) throw std::invalid_argument("split_tasks: train and test dimensions differ");
  TaskSequence seq;
  for (std::size_t first = 0; first < train.classes; first += classes_per_task) {
    Task task;
    for (std::size_t c = first; c < first + classes_per_task; ++c) task.classes.push_back(c);
    auto slice = [&](const Dataset& src) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < src.size(); ++i)
        if (src.labels[i] >= first && src.labels[i] < first + classes_per_task) rows.push_back(i);
      Dataset d = src.subset(rows);
      if (local_labels) {
        for (auto& y : d.labels) y -= first;
        d.classes = classes_per_task;
      }
      return d;
    };
    task.train = slice(train);
    task.test = slice(test);
    const Standardizer s = Standardizer::fit(task.train);
    s.apply(task.train);
    s.apply(task.test);
    seq.tasks.push_back(std::move(task));
  }
  return seq;
}

}  // namespace radial
