#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "radial/config.hpp"
#include "radial/datasets.hpp"
#include "radial/elbo.hpp"
#include "radial/layers.hpp"
#include "radial/metrics.hpp"
#include "radial/records.hpp"
#include "radial/snapshot.hpp"

namespace radial {

/// Standardized splits for one experiment.
struct TrainData {
  Dataset train;
  Dataset val;  ///< empty when val_fraction = 0
  Dataset test;
};

/// Builds the configured dataset from rng stream "data" of the run seed.
/// Features are standardized by training-set statistics.
TrainData make_train_data(const ExperimentConfig& cfg);

Architecture architecture_for(const ExperimentConfig& cfg, std::size_t input_dim,
                              std::size_t output_dim, std::size_t heads = 1,
                              HeadMode mode = HeadMode::single);

/// A dataset evaluated every epoch through a given head.
struct EvalSet {
  const Dataset* data = nullptr;
  std::size_t head = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  double nll_sum = 0.0;  ///< dataset sum of sample-averaged NLL
  ProbSamples probs;
};

/// Mean-predictive evaluation with `samples` weight draws. No graph is built.
EvalResult evaluate(const VariationalNetwork& net, const Dataset& data, std::size_t head,
                    std::size_t samples, Rng& rng);

/// Per-epoch state handed to the tracker.
struct EpochContext {
  std::size_t epoch = 0;
  std::size_t task = 0;
};

struct TrainResult {
  std::vector<MetricsRecord> records;
  bool radial_prior_caveat = false;
  std::size_t rejected_steps = 0;  ///< optimizer steps refused for non-finite gradients
  std::optional<std::size_t> best_epoch;  ///< set when early stopping restored a checkpoint
  double final_train_acc = 0.0;
  double final_train_nll = 0.0;
};

struct TrainSession {
  const ExperimentConfig* cfg = nullptr;
  const Prior* prior = nullptr;
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;  ///< optional, used for early stopping
  std::vector<EvalSet> eval_sets;  ///< one per task column of the records
  std::size_t head = 0;
  std::size_t task = 0;
  std::size_t epochs = 0;
  std::size_t epoch_offset = 0;  ///< first epoch index written to records
  bool track = true;             ///< emit one record per epoch
};

/// Optional mean pretraining, then ELBO training of `net` in place.
/// Only the active head's and trunk's parameters are updated.
TrainResult train_network(VariationalNetwork& net, const TrainSession& session, Rng& rng);

/// Builds data, network and prior from `cfg` and trains.
struct RunOutput {
  VariationalNetwork net;
  TrainData data;
  TrainResult result;
};
RunOutput run_training(const ExperimentConfig& cfg);

/// Grid cells over (epochs, batch_size, lr); empty grid lists keep the base value.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base);

}  // namespace radial
