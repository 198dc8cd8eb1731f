#pragma once

#include <map>
#include <optional>
#include <string>

namespace rfmap {

// Minimal sectioned key-value config reader:
//   [section]
//   key = value        # comment
// Values are bare scalars or quoted strings. Lookups mark keys as consumed;
// ensure_fully_consumed() rejects typos instead of ignoring them.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);

  std::optional<std::string> get_string(const std::string& section, const std::string& key) const;
  std::optional<double> get_double(const std::string& section, const std::string& key) const;
  std::optional<long long> get_int(const std::string& section, const std::string& key) const;
  std::optional<bool> get_bool(const std::string& section, const std::string& key) const;

  // Throws ConfigError listing any key no lookup ever touched.
  void ensure_fully_consumed() const;

  bool empty() const { return values_.empty(); }

  // Canonical serialization (sorted sections/keys) for manifest hashing.
  std::string canonical() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::map<std::string, bool> consumed_;
  std::string path_;
};

// FNV-1a over a string; used to fingerprint resolved run parameters.
std::string fnv1a_hex(const std::string& text);

}  // namespace rfmap
