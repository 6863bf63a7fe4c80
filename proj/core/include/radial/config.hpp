#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "radial/elbo.hpp"
#include "radial/layers.hpp"
#include "radial/optim.hpp"

namespace radial {

/// Config problem tied to a source line (0 when not line-specific).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Flat `key = value` text, one key per line, `#` starts a comment.
struct KeyValueFile {
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::string source;
  std::map<std::string, Entry> entries;

  static KeyValueFile parse(std::string_view text, std::string source = "<config>");
  static KeyValueFile load(const std::filesystem::path& path);
};

struct DatasetSpec {
  std::string kind = "moons";  ///< moons | blobs | clusters | ambiguous | idx
  std::size_t n_train = 512;
  std::size_t n_test = 512;
  double noise = 0.2;
  double label_noise = 0.0;
  std::size_t classes = 2;
  std::size_t dim = 2;
  double spread = 1.0;
  double band = 0.2;
  double val_fraction = 0.1;
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
};

/// Everything needed to reproduce one run. Unknown keys are rejected.
struct ExperimentConfig {
  std::string run_id = "run";
  std::uint64_t seed = 0;

  // model
  std::vector<std::size_t> hidden{100, 100};
  PosteriorFamily family = PosteriorFamily::radial();
  double rho_init = -6.0;
  std::string prior = "unit";  ///< unit | snapshot
  std::string prior_snapshot;  ///< path used when prior = snapshot

  // objective and schedule
  OptimizerSpec optimizer;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t n_samples = 1;
  std::size_t pretrain_epochs = 0;
  bool early_stopping = false;
  KlScaling kl_scaling = KlScaling::batch_fraction;
  bool include_constants = false;

  // evaluation
  std::size_t train_eval_samples = 1;
  std::size_t test_samples = 16;
  std::size_t grad_std_draws = 8;
  std::size_t grad_std_probe = 256;

  DatasetSpec data;

  // truncation experiment
  std::vector<double> truncation_thresholds{0.5, 1.0, 2.0};
  std::vector<std::size_t> truncation_samples{1, 8};
  std::size_t truncation_repeats = 3;
  double truncation_sigma = 0.12;

  // continual learning
  HeadMode head_mode = HeadMode::multi;
  std::size_t classes_per_task = 2;
  std::vector<std::size_t> grid_epochs;
  std::vector<std::size_t> grid_batch_size;
  std::vector<double> grid_lr;

  // gradient-variance probe
  std::vector<std::size_t> probe_widths{71, 64, 64, 64, 10};
  std::vector<double> sigma_grid{0.01, 0.03, 0.1, 0.3, 1.0};
  std::size_t probe_seeds = 32;
  std::size_t probe_batch = 32;

  // geometry
  std::vector<std::size_t> dims{1, 10, 10000};
  double sigma = 1.0;
  std::size_t mc_samples = 10000;
  std::size_t bins = 50;

  // referral / calibration
  std::string uncertainty = "mutual_information";
  std::vector<double> referral_fractions{0.0, 0.1, 0.2, 0.3};

  /// Applies every entry of `file` on top of the current values.
  void apply(const KeyValueFile& file);
  /// Sets one key; throws std::invalid_argument on unknown key or bad value.
  void set(std::string_view key, std::string_view value);
  /// Canonical `key = value` listing of every setting, in a fixed order.
  std::string echo() const;
  /// Throws ConfigError for inconsistent settings.
  void validate() const;

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_text(std::string_view text);
  static const std::vector<std::string>& known_keys();
};

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace radial
