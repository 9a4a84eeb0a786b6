#pragma once

#include <optional>
#include <string>

#include "ug/core.hpp"
#include "ug/schedule.hpp"

namespace ug {

using Condition = std::optional<int>;

/*
 * Noise predictor eps(x_t, t; c). Implementations are deterministic and
 * immutable once constructed, so a single instance may be shared by
 * concurrent sampling loops. The same predictor is evaluated at the target
 * resolution and, with adjusted time, at the trained resolution.
 */
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual Field predict(const Field& x, int t, Condition c) const = 0;

  // Human-readable description of the accepted shapes, used in error messages.
  virtual std::string shape_family() const = 0;

  // Number of condition labels understood; 0 for unconditional predictors.
  virtual int num_classes() const { return 0; }

  virtual const NoiseSchedule& schedule() const = 0;

 protected:
  void check_condition(Condition c) const {
    if (c && (*c < 0 || *c >= num_classes()))
      throw ConfigError("unknown condition label " + std::to_string(*c) + " (predictor has " +
                        std::to_string(num_classes()) + " classes)");
  }

  [[noreturn]] void reject_shape(const Field& x) const {
    throw ShapeError("predictor does not accept shape " + x.shape().str() + "; supported: " + shape_family());
  }
};

}  // namespace ug
