#pragma once

#include <stdexcept>
#include <string>

namespace rfmap {

// Error taxonomy mirrors the CLI exit codes: config (2), data (3), numerics (4).
// Library code throws; only the CLI decides what an error is worth as an exit code.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rfmap
