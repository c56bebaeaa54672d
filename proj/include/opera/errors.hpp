#pragma once

#include <stdexcept>
#include <string>

namespace opera {

// Bad or inconsistent configuration / input data. CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An off-policy estimate could not be produced from the given data
// (support violation, degenerate weights, empty fold, ...).
// CLI maps uncaught instances to exit code 3.
class EstimatorError : public std::runtime_error {
 public:
  explicit EstimatorError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace opera
