#include "softprune/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace softprune {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

ExperimentConfig::ExperimentConfig(std::map<std::string, std::string> schema)
    : values_(std::move(schema)) {}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key), key);
  it->second = value;
}

void ExperimentConfig::merge_text(std::string_view text, std::string_view source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, line_no), "");
    }
    set(trim(std::string_view(stripped).substr(0, eq)),
        trim(std::string_view(stripped).substr(eq + 1)));
  }
}

void ExperimentConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path), "");
  std::stringstream buffer;
  buffer << in.rdbuf();
  merge_text(buffer.str(), path);
}

bool ExperimentConfig::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& ExperimentConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key), key);
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  const std::string& raw = get(key);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size() || errno == ERANGE) {
    throw ConfigError(fmt::format("'{}' expects a number, got '{}'", key, raw), key);
  }
  return value;
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const {
  const std::string& raw = get(key);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
  if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size()) {
    throw ConfigError(fmt::format("'{}' expects a non-negative integer, got '{}'", key, raw), key);
  }
  return value;
}

std::size_t ExperimentConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(get_u64(key));
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  const std::string& raw = get(key);
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw ConfigError(fmt::format("'{}' expects true or false, got '{}'", key, raw), key);
}

std::vector<double> ExperimentConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::string s = trim(item);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw ConfigError(fmt::format("'{}' expects a comma-separated number list", key), key);
    }
    out.push_back(v);
  }
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    if (key.rfind("output.", 0) == 0) continue;
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace softprune
