#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "radial/config.hpp"
#include "radial/datasets.hpp"
#include "radial/records.hpp"

namespace radial {

/// A task with its own held-out validation rows.
struct ContinualTask {
  std::vector<std::size_t> classes;
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Splits the configured dataset into consecutive class groups. Labels are
/// task-local in multi-head mode and global otherwise.
std::vector<ContinualTask> make_continual_tasks(const ExperimentConfig& cfg);

struct ContinualResult {
  /// accuracy[t][j]: test accuracy on task j after training through task t
  /// (empty optional for j > t).
  std::vector<std::vector<std::optional<double>>> accuracy;
  std::vector<double> average;  ///< running mean over tasks 0..t
  std::vector<double> val_average;  ///< same, on validation sets
  std::vector<MetricsRecord> records;
  bool radial_prior_caveat = false;
};

/// Trains the tasks in order. The first task uses a unit Gaussian prior; every
/// later task uses the previous posterior as prior, except that a fresh head
/// gets a unit prior.
ContinualResult continual_learning_run(const ExperimentConfig& cfg, const std::vector<ContinualTask>& tasks);

struct GridCell {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double lr = 0.0;
  double final_val_average = 0.0;
};

struct ContinualSearch {
  std::vector<GridCell> cells;
  std::size_t best = 0;  ///< index into cells
  ContinualResult result;  ///< the run of the selected cell
};

/// Runs every grid cell and keeps the one with the highest validation accuracy
/// averaged over all tasks after the final task. Ties go to the earlier cell.
ContinualSearch continual_grid_search(const ExperimentConfig& cfg, const std::vector<ContinualTask>& tasks);

}  // namespace radial
