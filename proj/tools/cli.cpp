#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "build_info.hpp"
#include "commands.hpp"
#include "radial/records.hpp"

namespace radial::cli {

namespace fs = std::filesystem;

std::string build_id() { return RADIAL_BUILD_ID; }

namespace {

struct GlobalOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::vector<std::string> overrides;  ///< key=value, applied after the config file
};

/// Config error, missing file or bad override: reported as a usage error.
struct VersionRequested {};

struct InvocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig cfg;
  if (!g.config.empty()) {
    if (!fs::is_regular_file(g.config)) throw InvocationError("config file not found: " + g.config);
    try {
      cfg = ExperimentConfig::from_file(g.config);
    } catch (const ConfigError& e) {
      throw InvocationError(e.what());
    }
  }
  for (std::size_t i = 0; i < g.overrides.size(); ++i) {
    const auto& kv = g.overrides[i];
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvocationError("--set expects key=value, got '" + kv + "'");
    try {
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const std::exception& e) {
      throw InvocationError("--set " + kv + ": " + e.what());
    }
  }
  if (g.seed) cfg.seed = *g.seed;
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw InvocationError(e.what());
  }
  return cfg;
}

fs::path output_dir(const GlobalOptions& g) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "radial-out";
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

/// Writes every file, then the sidecar. On failure removes what this call wrote.
void write_outputs(const fs::path& dir, const std::string& command, const GlobalOptions& g,
                   const ExperimentConfig& cfg, const CommandOutput& result) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  try {
    nlohmann::ordered_json meta;
    meta["command"] = command;
    meta["build_id"] = build_id();
    meta["seed"] = cfg.seed;
    meta["config_path"] = g.config;
    meta["overrides"] = g.overrides;
    meta["config"] = lines(cfg.echo());
    meta["outputs"] = nlohmann::ordered_json::array();
    for (const auto& f : result.files) {
      write_file_atomic(dir / f.name, f.content);
      written.push_back(dir / f.name);
      meta["outputs"].push_back(f.name);
    }
    meta["ok"] = result.ok;
    meta["notes"] = result.notes;
    const fs::path sidecar = dir / (command + ".meta.json");
    write_file_atomic(sidecar, meta.dump(2) + "\n");
  } catch (...) {
    std::error_code ignored;
    for (const auto& p : written) fs::remove(p, ignored);
    throw;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radial and mean-field variational BNN experiments and diagnostics", "radial"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "key = value experiment config file");
  app.add_option("--out", g.out, std::string("output directory (default $") + kOutDirEnv + " or ./radial-out)");
  app.add_option("--seed", g.seed, "seed override");
  app.add_flag("--quiet", g.quiet, "no progress output");
  app.add_option("--set", g.overrides, "config override key=value, repeatable")->take_all();
  app.add_flag_function(
      "--version", [](std::int64_t) { throw VersionRequested{}; }, "print the build id");

  SoapBubbleOptions soap;
  auto* c_soap = app.add_subcommand("soap-bubble", "radius distribution of Gaussian and radial noise");
  c_soap->add_option("--d", soap.dims, "dimensions (default: config dims)")->delimiter(',');
  c_soap->add_option("--sigma", soap.sigma, "noise scale")->capture_default_str();
  c_soap->add_option("--samples", soap.samples, "Monte Carlo draws per dimension");
  c_soap->add_option("--bins", soap.bins, "histogram bins");
  c_soap->add_option("--pair-d", soap.pair_dims, "dimensions for the pairwise-distance table")->delimiter(',');
  c_soap->add_option("--pair-points", soap.pair_points, "points per pairwise-distance estimate");

  MarginalOptions marg;
  auto* c_marg = app.add_subcommand("marginal", "single-coordinate marginal of Gaussian and radial noise");
  c_marg->add_option("--d", marg.dims, "dimensions")->delimiter(',');
  c_marg->add_option("--samples", marg.samples, "Monte Carlo draws per dimension");
  c_marg->add_option("--bins", marg.bins, "histogram bins");

  GradVarianceOptions gv;
  auto* c_gv = app.add_subcommand("grad-variance", "NLL-gradient spread across a sigma grid");
  c_gv->add_option("--family", gv.families, "families to probe")->delimiter(',')->capture_default_str();
  c_gv->add_option("--layer", gv.layer, "trunk layer whose means are probed")->capture_default_str();

  auto* c_train = app.add_subcommand("train", "train one network and record per-epoch dynamics");
  auto* c_trunc = app.add_subcommand("truncation", "truncated-noise MFVI against the untruncated baseline");

  ContinualOptions cont;
  auto* c_cont = app.add_subcommand("continual", "variational continual learning over split tasks");
  c_cont->add_option("--head-mode", cont.head_modes, "multi, single or both")->delimiter(',');
  c_cont->add_option("--family", cont.families, "families to run")->delimiter(',');

  ModelOptions cal_model, ref_model;
  auto* c_cal = app.add_subcommand("calibrate", "reliability bins and ECE on the test split");
  c_cal->add_option("--model", cal_model.model, "saved model.snap (default: train from the config)");
  auto* c_ref = app.add_subcommand("refer", "AUC after referring the most uncertain test points");
  c_ref->add_option("--model", ref_model.model, "saved model.snap (default: train from the config)");

  EntropyOptions ent;
  auto* c_ent = app.add_subcommand("entropy-check", "validate the radial entropy constant");
  c_ent->add_option("--d", ent.dims, "dimensions (>= 2)")->delimiter(',');
  c_ent->add_option("--samples", ent.samples, "Monte Carlo draws per dimension");

  auto* c_self = app.add_subcommand("selftest", "run the built-in oracle checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const VersionRequested&) {
    out << build_id() << '\n';
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "radial: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  if (std::find(cont.head_modes.begin(), cont.head_modes.end(), "both") != cont.head_modes.end())
    cont.head_modes = {"multi", "single"};

  CommandContext ctx;
  try {
    ctx.cfg = load_config(g);
  } catch (const InvocationError& e) {
    err << "radial " << command << ": " << e.what() << '\n';
    return kExitUsage;
  }
  ctx.log = g.quiet ? nullptr : &err;

  const std::map<CLI::App*, std::function<CommandOutput()>> dispatch{
      {c_soap, [&] { return soap_bubble(ctx, soap); }},
      {c_marg, [&] { return marginal(ctx, marg); }},
      {c_gv, [&] { return grad_variance(ctx, gv); }},
      {c_train, [&] { return train(ctx); }},
      {c_trunc, [&] { return truncation(ctx); }},
      {c_cont, [&] { return continual(ctx, cont); }},
      {c_cal, [&] { return calibrate(ctx, cal_model); }},
      {c_ref, [&] { return refer(ctx, ref_model); }},
      {c_ent, [&] { return entropy_check(ctx, ent); }},
      {c_self, [&] { return selftest(ctx); }},
  };

  const fs::path dir = output_dir(g);
  try {
    const CommandOutput result = dispatch.at(sub)();
    write_outputs(dir, command, g, ctx.cfg, result);
    if (!g.quiet) {
      for (const auto& f : result.files) err << "wrote " << (dir / f.name).string() << '\n';
    }
    if (!result.ok) {
      err << "radial " << command << ": checks failed, see " << (dir / (command + ".meta.json")).string() << '\n';
      return kExitDomain;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "radial " << command << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "radial " << command << ": " << e.what() << '\n';
    return kExitDomain;
  }
}

}  // namespace radial::cli
