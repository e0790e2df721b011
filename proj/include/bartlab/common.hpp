#pragma once

#include <stdexcept>
#include <string>

namespace bartlab {

// Error taxonomy mirrors the CLI exit codes: config/ingestion problems (2),
// capacity caps (3), numerical failures (4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bartlab
