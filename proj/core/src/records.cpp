#include "radial/records.hpp"

#include <fstream>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

#include "radial/config.hpp"

namespace radial {

std::string metrics_csv_header(std::size_t n_tasks) {
  std::string h = "run_id,epoch,task,total,nll,entropy,cross_entropy,grad_std,train_acc";
  for (std::size_t t = 0; t < n_tasks; ++t) h += ",eval_acc_task" + std::to_string(t);
  h += ",ece,auc";
  return h;
}

std::string metrics_csv_row(const MetricsRecord& r, std::size_t n_tasks) {
  if (r.eval_acc.size() > n_tasks)
    throw std::invalid_argument("metrics_csv_row: record has more eval columns than tasks");
  std::string s = csv_escape(r.run_id) + ',' + std::to_string(r.epoch) + ',' + std::to_string(r.task) +
                  ',' + csv_number(r.total) + ',' + csv_number(r.nll) + ',' + csv_number(r.entropy) +
                  ',' + csv_number(r.cross_entropy) + ',' + csv_optional(r.grad_std) + ',' +
                  csv_optional(r.train_acc);
  for (std::size_t t = 0; t < n_tasks; ++t)
    s += ',' + (t < r.eval_acc.size() ? csv_optional(r.eval_acc[t]) : std::string());
  s += ',' + csv_optional(r.ece) + ',' + csv_optional(r.auc);
  return s;
}

std::string metrics_csv(std::span<const MetricsRecord> records, std::size_t n_tasks) {
  std::string out = metrics_csv_header(n_tasks) + '\n';
  for (const auto& r : records) out += metrics_csv_row(r, n_tasks) + '\n';
  return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size())
    throw std::invalid_argument("CsvTable: row has " + std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  rows_.push_back(std::move(cells));
  return *this;
}

std::string CsvTable::str() const {
  auto line = [](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += csv_escape(cells[i]);
    }
    return s + '\n';
  };
  std::string out = line(header_);
  for (const auto& r : rows_) out += line(r);
  return out;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string csv_number(double v) { return format_double(v); }

std::string csv_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.parent_path() /
                   ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace radial
