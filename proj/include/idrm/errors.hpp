#pragma once

#include <stdexcept>
#include <string>

namespace idrm {

// Raised when a numerical quantity turns non-finite during evaluation.
// point_index identifies the offending quadrature/evaluation point when known
// (-1 otherwise).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, long point_index = -1)
      : std::runtime_error(what), point_index(point_index) {}
  long point_index;
};

// Invalid configuration, dimensions or arguments. Message names the expected
// vs given quantity.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace idrm
