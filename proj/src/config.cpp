#include "rfmap/config.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rfmap/errors.hpp"

namespace rfmap {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
    ++a;
  }
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
    --b;
  }
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') {
      quoted = !quoted;
    } else if (s[i] == '#' && !quoted) {
      return s.substr(0, i);
    }
  }
  return s;
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  Config cfg;
  cfg.path_ = path;
  std::string section;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(where + ": empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!cfg.values_[section].emplace(key, value).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    cfg.consumed_[section + "." + key] = false;
  }
  return cfg;
}

std::optional<std::string> Config::get_string(const std::string& section,
                                              const std::string& key) const {
  auto sec = values_.find(section);
  if (sec == values_.end()) {
    return std::nullopt;
  }
  auto it = sec->second.find(key);
  if (it == sec->second.end()) {
    return std::nullopt;
  }
  consumed_[section + "." + key] = true;
  return it->second;
}

std::optional<double> Config::get_double(const std::string& section, const std::string& key) const {
  auto raw = get_string(section, key);
  if (!raw) {
    return std::nullopt;
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(*raw, &pos);
    if (pos != raw->size()) {
      throw std::invalid_argument("trailing junk");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + section + "." + key + " is not a number: '" + *raw + "'");
  }
}

std::optional<long long> Config::get_int(const std::string& section, const std::string& key) const {
  auto raw = get_string(section, key);
  if (!raw) {
    return std::nullopt;
  }
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(*raw, &pos);
    if (pos != raw->size()) {
      throw std::invalid_argument("trailing junk");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + section + "." + key + " is not an integer: '" + *raw + "'");
  }
}

std::optional<bool> Config::get_bool(const std::string& section, const std::string& key) const {
  auto raw = get_string(section, key);
  if (!raw) {
    return std::nullopt;
  }
  if (*raw == "true" || *raw == "1") {
    return true;
  }
  if (*raw == "false" || *raw == "0") {
    return false;
  }
  throw ConfigError("config key " + section + "." + key + " is not a boolean: '" + *raw + "'");
}

void Config::ensure_fully_consumed() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_) {
    if (!used) {
      if (!unknown.empty()) {
        unknown += ", ";
      }
      unknown += key;
    }
  }
  if (!unknown.empty()) {
    throw ConfigError("unknown config keys in '" + path_ + "': " + unknown);
  }
}

std::string Config::canonical() const {
  std::ostringstream out;
  for (const auto& [section, entries] : values_) {
    out << '[' << section << "]\n";
    for (const auto& [key, value] : entries) {
      out << key << '=' << value << '\n';
    }
  }
  return out.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h = (h ^ c) * 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rfmap
