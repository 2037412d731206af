#include "softprune/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace softprune {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, const std::string& path, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end == cell.c_str()) {
    throw IoError(fmt::format("{}:{}: '{}' is not a number", path, line_no, cell));
  }
  while (*end == ' ' || *end == '\r') ++end;
  if (*end != '\0') throw IoError(fmt::format("{}:{}: '{}' is not a number", path, line_no, cell));
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    if (!header_seen) {
      header_seen = true;
      columns = cells.size();
      if (columns < 2) throw IoError(fmt::format("{}: need at least one feature and a target", path));
      continue;
    }
    if (cells.size() != columns) {
      throw IoError(fmt::format("{}:{}: expected {} columns, got {}", path, line_no, columns,
                                cells.size()));
    }
    std::vector<double> row;
    row.reserve(columns);
    for (const auto& c : cells) row.push_back(parse_cell(c, path, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(fmt::format("{}: no data rows", path));

  Dataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(columns - 1);
  data.inputs.resize(n, p);
  data.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) data.inputs(i, j) = r[static_cast<std::size_t>(j)];
    data.targets(i) = r.back();
  }
  data.validate();
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.features(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) out << format_double(data.inputs(i, j)) << ',';
    out << format_double(data.targets(i)) << '\n';
  }
}

std::ofstream open_output(const std::string& path, bool overwrite) {
  std::error_code ec;
  if (!overwrite && std::filesystem::exists(path, ec)) {
    throw IoError(fmt::format("refusing to overwrite existing '{}' (set output.overwrite=true)", path));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows,
                       const std::string& config_hash) {
  out << "# config_hash=" << config_hash << '\n';
  out << "iter,loss,sparsity,threshold,penalty\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << format_double(r.loss) << ',' << format_double(r.sparsity) << ','
        << format_double(r.threshold) << ',' << format_double(r.penalty) << '\n';
  }
}

void write_weights(std::ostream& out, const WeightsFile& file) {
  out << "# config_hash=" << file.config_hash << '\n';
  out << "# dims=" << file.weights.size() << '\n';
  out << "# seed=" << file.seed << '\n';
  for (Eigen::Index i = 0; i < file.weights.size(); ++i) out << format_double(file.weights(i)) << '\n';
}

WeightsFile read_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  WeightsFile file;
  long long dims = -1;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "config_hash") file.config_hash = value;
      else if (key == "dims") dims = std::stoll(value);
      else if (key == "seed") file.seed = std::stoull(value);
      continue;
    }
    values.push_back(parse_cell(line, path, line_no));
  }
  if (dims < 0 || static_cast<std::size_t>(dims) != values.size()) {
    throw IoError(fmt::format("{}: header dims does not match {} values", path, values.size()));
  }
  file.weights = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  return file;
}

}  // namespace softprune
