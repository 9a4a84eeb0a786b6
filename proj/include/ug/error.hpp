#pragma once

#include <stdexcept>
#include <string>

namespace ug {

// Incompatible field shapes or unsupported predictor inputs.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid parameters, schedules or experiment configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values or training divergence.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ug
