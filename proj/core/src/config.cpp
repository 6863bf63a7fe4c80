#include "radial/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "radial/metrics.hpp"

namespace radial {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw std::invalid_argument("key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                              "' as " + std::string(expected));
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || std::isnan(out)) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto item : split_list(v)) out.push_back(to_size(key, item));
  return out;
}

std::vector<double> to_double_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt(v[i]);
  }
  return out;
}

std::string sizes(const std::vector<std::size_t>& v) {
  return join(v, [](std::size_t x) { return std::to_string(x); });
}
std::string doubles(const std::vector<double>& v) { return join(v, format_double); }
std::string boolean(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RADIAL_KEY(name, setter, getter)                                              \
  Key {                                                                               \
    name, [](ExperimentConfig& c, std::string_view v) { [[maybe_unused]] const std::string_view k = name; setter; }, \
        [](const ExperimentConfig& c) -> std::string { return getter; }               \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      RADIAL_KEY("run_id", c.run_id = std::string(v), c.run_id),
      RADIAL_KEY("seed", c.seed = to_u64(k, v), std::to_string(c.seed)),
      RADIAL_KEY("hidden", c.hidden = to_size_list(k, v), sizes(c.hidden)),
      RADIAL_KEY("family", c.family.kind = parse_family(v), std::string(to_string(c.family.kind))),
      RADIAL_KEY("truncation", c.family.truncation = to_double(k, v), format_double(c.family.truncation)),
      RADIAL_KEY("rho_init", c.rho_init = to_double(k, v), format_double(c.rho_init)),
      RADIAL_KEY("prior", c.prior = std::string(v), c.prior),
      RADIAL_KEY("prior_snapshot", c.prior_snapshot = std::string(v), c.prior_snapshot),
      RADIAL_KEY("optimizer", c.optimizer.kind = parse_optimizer(v), std::string(to_string(c.optimizer.kind))),
      RADIAL_KEY("lr", c.optimizer.lr = to_double(k, v), format_double(c.optimizer.lr)),
      RADIAL_KEY("momentum", c.optimizer.momentum = to_double(k, v), format_double(c.optimizer.momentum)),
      RADIAL_KEY("lr_decay", c.optimizer.decay = to_double(k, v), format_double(c.optimizer.decay)),
      RADIAL_KEY("beta1", c.optimizer.beta1 = to_double(k, v), format_double(c.optimizer.beta1)),
      RADIAL_KEY("beta2", c.optimizer.beta2 = to_double(k, v), format_double(c.optimizer.beta2)),
      RADIAL_KEY("adam_eps", c.optimizer.eps = to_double(k, v), format_double(c.optimizer.eps)),
      RADIAL_KEY("epochs", c.epochs = to_size(k, v), std::to_string(c.epochs)),
      RADIAL_KEY("batch_size", c.batch_size = to_size(k, v), std::to_string(c.batch_size)),
      RADIAL_KEY("n_samples", c.n_samples = to_size(k, v), std::to_string(c.n_samples)),
      RADIAL_KEY("pretrain_epochs", c.pretrain_epochs = to_size(k, v), std::to_string(c.pretrain_epochs)),
      RADIAL_KEY("early_stopping", c.early_stopping = to_bool(k, v), boolean(c.early_stopping)),
      RADIAL_KEY("kl_scaling", c.kl_scaling = parse_kl_scaling(v), std::string(to_string(c.kl_scaling))),
      RADIAL_KEY("include_constants", c.include_constants = to_bool(k, v), boolean(c.include_constants)),
      RADIAL_KEY("train_eval_samples", c.train_eval_samples = to_size(k, v), std::to_string(c.train_eval_samples)),
      RADIAL_KEY("test_samples", c.test_samples = to_size(k, v), std::to_string(c.test_samples)),
      RADIAL_KEY("grad_std_draws", c.grad_std_draws = to_size(k, v), std::to_string(c.grad_std_draws)),
      RADIAL_KEY("grad_std_probe", c.grad_std_probe = to_size(k, v), std::to_string(c.grad_std_probe)),
      RADIAL_KEY("dataset", c.data.kind = std::string(v), c.data.kind),
      RADIAL_KEY("n_train", c.data.n_train = to_size(k, v), std::to_string(c.data.n_train)),
      RADIAL_KEY("n_test", c.data.n_test = to_size(k, v), std::to_string(c.data.n_test)),
      RADIAL_KEY("data_noise", c.data.noise = to_double(k, v), format_double(c.data.noise)),
      RADIAL_KEY("label_noise", c.data.label_noise = to_double(k, v), format_double(c.data.label_noise)),
      RADIAL_KEY("classes", c.data.classes = to_size(k, v), std::to_string(c.data.classes)),
      RADIAL_KEY("input_dim", c.data.dim = to_size(k, v), std::to_string(c.data.dim)),
      RADIAL_KEY("spread", c.data.spread = to_double(k, v), format_double(c.data.spread)),
      RADIAL_KEY("band", c.data.band = to_double(k, v), format_double(c.data.band)),
      RADIAL_KEY("val_fraction", c.data.val_fraction = to_double(k, v), format_double(c.data.val_fraction)),
      RADIAL_KEY("idx_train_images", c.data.idx_train_images = std::string(v), c.data.idx_train_images),
      RADIAL_KEY("idx_train_labels", c.data.idx_train_labels = std::string(v), c.data.idx_train_labels),
      RADIAL_KEY("idx_test_images", c.data.idx_test_images = std::string(v), c.data.idx_test_images),
      RADIAL_KEY("idx_test_labels", c.data.idx_test_labels = std::string(v), c.data.idx_test_labels),
      RADIAL_KEY("truncation_thresholds", c.truncation_thresholds = to_double_list(k, v), doubles(c.truncation_thresholds)),
      RADIAL_KEY("truncation_samples", c.truncation_samples = to_size_list(k, v), sizes(c.truncation_samples)),
      RADIAL_KEY("truncation_repeats", c.truncation_repeats = to_size(k, v), std::to_string(c.truncation_repeats)),
      RADIAL_KEY("truncation_sigma", c.truncation_sigma = to_double(k, v), format_double(c.truncation_sigma)),
      RADIAL_KEY("head_mode", c.head_mode = parse_head_mode(v), std::string(to_string(c.head_mode))),
      RADIAL_KEY("classes_per_task", c.classes_per_task = to_size(k, v), std::to_string(c.classes_per_task)),
      RADIAL_KEY("grid_epochs", c.grid_epochs = to_size_list(k, v), sizes(c.grid_epochs)),
      RADIAL_KEY("grid_batch_size", c.grid_batch_size = to_size_list(k, v), sizes(c.grid_batch_size)),
      RADIAL_KEY("grid_lr", c.grid_lr = to_double_list(k, v), doubles(c.grid_lr)),
      RADIAL_KEY("probe_widths", c.probe_widths = to_size_list(k, v), sizes(c.probe_widths)),
      RADIAL_KEY("sigma_grid", c.sigma_grid = to_double_list(k, v), doubles(c.sigma_grid)),
      RADIAL_KEY("probe_seeds", c.probe_seeds = to_size(k, v), std::to_string(c.probe_seeds)),
      RADIAL_KEY("probe_batch", c.probe_batch = to_size(k, v), std::to_string(c.probe_batch)),
      RADIAL_KEY("dims", c.dims = to_size_list(k, v), sizes(c.dims)),
      RADIAL_KEY("sigma", c.sigma = to_double(k, v), format_double(c.sigma)),
      RADIAL_KEY("mc_samples", c.mc_samples = to_size(k, v), std::to_string(c.mc_samples)),
      RADIAL_KEY("bins", c.bins = to_size(k, v), std::to_string(c.bins)),
      RADIAL_KEY("uncertainty", c.uncertainty = std::string(to_string(parse_uncertainty(v))), c.uncertainty),
      RADIAL_KEY("referral_fractions", c.referral_fractions = to_double_list(k, v), doubles(c.referral_fractions)),
  };
  return keys;
}

#undef RADIAL_KEY

}  // namespace

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(line ? source + ":" + std::to_string(line) + ": " + message
                              : source + ": " + message),
      line_(line) {}

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
  KeyValueFile f;
  f.source = std::move(source);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? text.npos : nl - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(f.source, line_no, "expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError(f.source, line_no, "empty key");
      if (auto it = f.entries.find(key); it != f.entries.end())
        throw ConfigError(f.source, line_no,
                          "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
      f.entries.emplace(key, Entry{value, line_no});
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  for (const auto& k : key_table())
    if (k.name == key) {
      k.set(*this, value);
      return;
    }
  throw std::invalid_argument("unknown key '" + std::string(key) + "'");
}

void ExperimentConfig::apply(const KeyValueFile& file) {
  // Apply in line order so errors point at the first bad line.
  std::vector<std::pair<std::size_t, const std::string*>> order;
  for (const auto& [key, entry] : file.entries) order.emplace_back(entry.line, &key);
  std::sort(order.begin(), order.end());
  for (const auto& [line, key] : order) {
    try {
      set(*key, file.entries.at(*key).value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(file.source, line, e.what());
    }
  }
}

std::string ExperimentConfig::echo() const {
  std::string out;
  for (const auto& k : key_table()) out += k.name + " = " + k.get(*this) + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("config", 0, m); };
  if (batch_size == 0) fail("batch_size must be positive");
  if (n_samples == 0) fail("n_samples must be positive");
  if (train_eval_samples == 0 || test_samples == 0) fail("evaluation sample counts must be positive");
  if (grad_std_draws == 1) fail("grad_std_draws must be 0 (off) or at least 2");
  if (!(optimizer.lr > 0.0)) fail("lr must be positive");
  if (!(family.truncation > 0.0)) fail("truncation must be positive");
  if (prior != "unit" && prior != "snapshot") fail("prior must be 'unit' or 'snapshot'");
  if (prior == "snapshot" && prior_snapshot.empty()) fail("prior = snapshot needs prior_snapshot");
  if (!(data.val_fraction >= 0.0 && data.val_fraction < 1.0)) fail("val_fraction must be in [0, 1)");
  if (early_stopping && data.val_fraction == 0.0) fail("early_stopping needs val_fraction > 0");
  if (probe_seeds < 2) fail("probe_seeds must be at least 2");
  for (double s : sigma_grid)
    if (!(s > 0.0)) fail("sigma_grid entries must be positive");
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  ExperimentConfig c;
  c.apply(KeyValueFile::load(path));
  return c;
}

ExperimentConfig ExperimentConfig::from_text(std::string_view text) {
  ExperimentConfig c;
  c.apply(KeyValueFile::parse(text));
  return c;
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : key_table()) n.push_back(k.name);
    return n;
  }();
  return names;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace radial
