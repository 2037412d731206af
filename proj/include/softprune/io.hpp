#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "softprune/core_math.hpp"
#include "softprune/models.hpp"
#include "softprune/trainer.hpp"

namespace softprune {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double; "nan"/"inf" otherwise.
std::string format_double(double x);

/// CSV with a header row; every other row numeric. Lines starting with '#'
/// are skipped. The last column becomes the targets.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);

/// Opens `path` for writing. Existing files are refused unless `overwrite`.
std::ofstream open_output(const std::string& path, bool overwrite);

void write_metrics_csv(std::ostream& out, std::span<const MetricRow> rows,
                       const std::string& config_hash);

struct WeightsFile {
  Vector weights;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// Header lines `# config_hash=..`, `# dims=..`, `# seed=..`, then one value
/// per line.
void write_weights(std::ostream& out, const WeightsFile& file);
WeightsFile read_weights(const std::string& path);

}  // namespace softprune
