#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "radial/layers.hpp"

namespace radial {

/// Frozen (mu, sigma) of one layer, flattened weights (row-major) then biases.
struct LayerPosterior {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t size() const { return mu.size(); }
  friend bool operator==(const LayerPosterior&, const LayerPosterior&) = default;
};

/// Immutable deep copy of a network's posterior.
class PosteriorSnapshot {
 public:
  PosteriorSnapshot() = default;
  PosteriorSnapshot(PosteriorFamily family, std::uint64_t seed, std::vector<LayerPosterior> trunk,
                    std::vector<LayerPosterior> heads);

  const PosteriorFamily& family() const { return family_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerPosterior>& trunk() const { return trunk_; }
  const std::vector<LayerPosterior>& heads() const { return heads_; }

  /// Throws std::invalid_argument naming the first mismatching layer.
  void check_congruent(const VariationalNetwork& net) const;

  std::string serialize() const;
  static PosteriorSnapshot deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static PosteriorSnapshot load(const std::filesystem::path& path);

  friend bool operator==(const PosteriorSnapshot&, const PosteriorSnapshot&) = default;

 private:
  PosteriorFamily family_;
  std::uint64_t seed_ = 0;
  std::vector<LayerPosterior> trunk_;
  std::vector<LayerPosterior> heads_;
};

PosteriorSnapshot snapshot(const VariationalNetwork& net, std::uint64_t seed = 0);

/// Rebuilds a network whose (mu, sigma) equal the snapshot's. More than one
/// head means multi-head mode.
VariationalNetwork restore_network(const PosteriorSnapshot& snap);

struct UnitGaussianPrior {};

/// Factorized Gaussian with per-coordinate mean and scale.
struct DiagonalGaussianPrior {
  std::vector<double> mu;
  std::vector<double> sigma;
};

/// Posterior of an earlier Radial run reused as a prior.
struct RadialSnapshotPrior {
  std::vector<double> mu;
  std::vector<double> sigma;
};

using LayerPrior = std::variant<UnitGaussianPrior, DiagonalGaussianPrior, RadialSnapshotPrior>;

/// Per-layer priors laid out like the network: trunk layers, then heads.
struct Prior {
  std::vector<LayerPrior> trunk;
  std::vector<LayerPrior> heads;

  /// Trunk priors followed by the prior of `head`.
  std::vector<const LayerPrior*> active(std::size_t head) const;
  bool uses_radial_snapshot() const;
  /// Throws std::invalid_argument on any layer count or size mismatch.
  void check_congruent(const VariationalNetwork& net) const;
};

Prior unit_prior(const VariationalNetwork& net);
/// Gaussian prior from an MFVI or truncated snapshot, radial prior from a
/// Radial one.
Prior load_prior(const PosteriorSnapshot& snap);
/// Same, after checking the snapshot fits `net`.
Prior load_prior(const PosteriorSnapshot& snap, const VariationalNetwork& net);

/// Dimension of a layer prior; 0 for the unit prior, which fits any layer.
std::size_t prior_size(const LayerPrior& prior);

}  // namespace radial
