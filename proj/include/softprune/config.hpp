#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace softprune {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat key-value experiment configuration with dotted section keys.
///
/// A config is bound to a schema (key -> default value). Setting a key the
/// schema does not know is an error, so typos fail loudly instead of being
/// ignored. Text form is one `key = value` per line; `#` starts a comment.
class ExperimentConfig {
 public:
  explicit ExperimentConfig(std::map<std::string, std::string> schema);

  void set(const std::string& key, const std::string& value);
  void merge_text(std::string_view text, std::string_view source);
  void merge_file(const std::string& path);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Sorted `key=value` lines for every key outside the `output.` section.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string fnv1a_hex(std::string_view text);

}  // namespace softprune
