#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "radial/config.hpp"

namespace radial::cli {

struct OutputFile {
  std::string name;
  std::string content;
};

/// Everything a subcommand produces. Nothing touches the disk until the
/// command has returned successfully.
struct CommandOutput {
  std::vector<OutputFile> files;
  nlohmann::ordered_json notes = nlohmann::ordered_json::object();
  bool ok = true;  ///< false makes the process exit with a domain error
};

struct CommandContext {
  ExperimentConfig cfg;
  std::ostream* log = nullptr;  ///< null under --quiet

  void say(const std::string& line) const {
    if (log) *log << line << '\n';
  }
};

struct SoapBubbleOptions {
  std::vector<std::size_t> dims;
  double sigma = 1.0;
  std::size_t samples = 0;
  std::size_t bins = 0;
  std::vector<std::size_t> pair_dims{2, 3, 10, 100, 1000};
  std::size_t pair_points = 1000;
};

struct MarginalOptions {
  std::vector<std::size_t> dims;
  std::size_t samples = 0;
  std::size_t bins = 0;
};

struct GradVarianceOptions {
  std::vector<std::string> families{"mfvi", "radial"};
  std::size_t layer = 0;
};

struct ContinualOptions {
  std::vector<std::string> head_modes;  ///< empty: the configured mode
  std::vector<std::string> families;    ///< empty: the configured family
};

struct ModelOptions {
  std::string model;  ///< snapshot path; empty trains one from the config
};

struct EntropyOptions {
  std::vector<std::size_t> dims{2, 3, 4, 5, 6, 10, 100, 1000};
  std::size_t samples = 0;
};

CommandOutput soap_bubble(const CommandContext& ctx, const SoapBubbleOptions& opt);
CommandOutput marginal(const CommandContext& ctx, const MarginalOptions& opt);
CommandOutput grad_variance(const CommandContext& ctx, const GradVarianceOptions& opt);
CommandOutput train(const CommandContext& ctx);
CommandOutput truncation(const CommandContext& ctx);
CommandOutput continual(const CommandContext& ctx, const ContinualOptions& opt);
CommandOutput calibrate(const CommandContext& ctx, const ModelOptions& opt);
CommandOutput refer(const CommandContext& ctx, const ModelOptions& opt);
CommandOutput entropy_check(const CommandContext& ctx, const EntropyOptions& opt);
CommandOutput selftest(const CommandContext& ctx);

/// Exact mean distance between independent uniform points on the unit sphere in R^d.
double sphere_mean_chord(std::size_t d);

}  // namespace radial::cli
