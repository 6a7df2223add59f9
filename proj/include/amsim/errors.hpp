#pragma once

#include <stdexcept>
#include <string>

namespace amsim {

/// Invalid parameters, malformed scenario files, unknown config keys.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite state reached during integration or optimisation.
struct NumericalDivergence : std::runtime_error {
  explicit NumericalDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace amsim
