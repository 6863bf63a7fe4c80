#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace radial {

/// One row per (epoch, task) of a training run.
///
/// `entropy` is E_q[log q] and `cross_entropy` is E_q[log p], so
/// total = nll + entropy - cross_entropy with nll summed over the training set.
struct MetricsRecord {
  std::string run_id;
  std::size_t epoch = 0;
  std::size_t task = 0;
  double total = 0.0;
  double nll = 0.0;
  double entropy = 0.0;
  double cross_entropy = 0.0;
  std::optional<double> grad_std;
  std::optional<double> train_acc;
  std::vector<std::optional<double>> eval_acc;  ///< one per task
  std::optional<double> ece;
  std::optional<double> auc;
};

std::string metrics_csv_header(std::size_t n_tasks);
std::string metrics_csv_row(const MetricsRecord& r, std::size_t n_tasks);
/// Header plus rows, LF line endings.
std::string metrics_csv(std::span<const MetricsRecord> records, std::size_t n_tasks);

/// Minimal CSV builder for the other report tables.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Quotes a cell when it contains a comma, quote or newline.
std::string csv_escape(const std::string& cell);
std::string csv_number(double v);
std::string csv_optional(const std::optional<double>& v);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace radial
