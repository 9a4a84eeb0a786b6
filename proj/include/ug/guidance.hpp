#pragma once

#include <chrono>
#include <cmath>
#include <optional>

#include "ug/predictor.hpp"
#include "ug/resample.hpp"
#include "ug/schedule.hpp"

namespace ug {

enum class Composition {
  CfgFirst,    // CFG at each resolution, then UG on the two composites
  UgInsideCfg  // UG on the unconditional and conditional predictions, then CFG
};

struct GuidanceConfig {
  double cfg_scale = 1.0;   // w
  double ug_theta = 0.0;    // theta
  double ug_eta = 1.0;      // eta, fraction of the schedule (high-noise end) with UG active
  ScalePlan plan;
  bool ablate_time_adjust = false;
  bool ablate_power_adjust = false;
  Composition composition = Composition::CfgFirst;

  void validate() const {
    if (!(cfg_scale >= 0.0)) throw ConfigError("cfg scale must be >= 0");
    if (!(ug_theta >= 0.0)) throw ConfigError("ug theta must be >= 0");
    if (!(ug_eta >= 0.0 && ug_eta <= 1.0)) throw ConfigError("ug eta must lie in [0, 1]");
    if (plan.n() < 1) throw ConfigError("scale plan must have n >= 1");
  }
};

// Predictor call accounting, split by resolution.
struct CallStats {
  long hi_calls = 0;
  long low_calls = 0;
  long hi_entries = 0;
  long low_entries = 0;
  double hi_seconds = 0.0;
  double low_seconds = 0.0;

  CallStats& operator+=(const CallStats& o) {
    hi_calls += o.hi_calls;
    low_calls += o.low_calls;
    hi_entries += o.hi_entries;
    low_entries += o.low_entries;
    hi_seconds += o.hi_seconds;
    low_seconds += o.low_seconds;
    return *this;
  }
};

inline Field cfg_combine(const Field& eps_uncond, const Field& eps_cond, double w) {
  require_same_shape(eps_uncond, eps_cond, "cfg_combine");
  Field out(eps_uncond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_uncond[i] + w * (eps_cond[i] - eps_uncond[i]);
  return out;
}

/// w_t = theta * H(t - (1 - eta) T) with H(0) = 1.
inline double guidance_scale(int t, int T, double theta, double eta) {
  if (t < 0 || t >= T) throw ConfigError("step " + std::to_string(t) + " outside [0, " + std::to_string(T) + ")");
  // Slack absorbs rounding in (1 - eta) * T so that eta * T integral hits the threshold exactly.
  const double threshold = (1.0 - eta) * static_cast<double>(T) - 1e-9;
  return static_cast<double>(t) >= threshold ? theta : 0.0;
}

struct LowResInput {
  Field field;   // D[x_t] / sqrt(P)
  int tau;
  double power;
};

inline LowResInput low_res_input(const Field& x_t, int t, const GuidanceConfig& cfg, const NoiseSchedule& schedule) {
  const int n = cfg.plan.n();
  const double p = cfg.ablate_power_adjust ? 1.0 : power_factor(schedule, t, n);
  const int tau = cfg.ablate_time_adjust ? t : adjusted_time(schedule, t, n);
  return {scaled(1.0 / std::sqrt(p), downsample_box(x_t, cfg.plan)), tau, p};
}

namespace detail {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline Field timed_predict(const Predictor& p, const Field& x, int t, Condition c, bool low, CallStats* stats) {
  Timer timer;
  Field out = p.predict(x, t, c);
  if (stats) {
    const double s = timer.seconds();
    auto entries = static_cast<long>(x.size());
    if (low) {
      ++stats->low_calls;
      stats->low_entries += entries;
      stats->low_seconds += s;
    } else {
      ++stats->hi_calls;
      stats->hi_entries += entries;
      stats->hi_seconds += s;
    }
  }
  return out;
}

// CFG composite of one predictor at one input; skips calls whose weight is zero.
inline Field cfg_predict(const Predictor& p, const Field& x, int t, Condition c, double w, bool low, CallStats* stats) {
  if (!c || w == 0.0) return timed_predict(p, x, t, std::nullopt, low, stats);
  const Field u = timed_predict(p, x, t, std::nullopt, low, stats);
  const Field k = timed_predict(p, x, t, c, low, stats);
  return cfg_combine(u, k, w);
}

}  // namespace detail

/// (1/sqrt(n)) * eps(D[x_t] / sqrt(P), tau; c), CFG-composited at the trained resolution.
inline Field adjusted_low_eps(const Predictor& p, const Field& x_t, int t, Condition c, const GuidanceConfig& cfg,
                              const NoiseSchedule& schedule, CallStats* stats = nullptr) {
  const LowResInput in = low_res_input(x_t, t, cfg, schedule);
  Field eps = detail::cfg_predict(p, in.field, in.tau, c, cfg.cfg_scale, true, stats);
  const double s = 1.0 / std::sqrt(static_cast<double>(cfg.plan.n()));
  for (auto& v : eps.data()) v *= s;
  return eps;
}

/// eps_hi + w_t * U[eps_low_adj - D[eps_hi]].
inline Field ug_combine(const Field& eps_hi, const Field& eps_low_adj, double w_t, const ScalePlan& plan) {
  const Field d_hi = downsample_box(eps_hi, plan);
  require_same_shape(d_hi, eps_low_adj, "ug_combine");
  if (w_t == 0.0) return eps_hi;
  const Field up = upsample_nearest(eps_low_adj - d_hi, plan);
  return linear_comb(1.0, eps_hi, w_t, up);
}

/*
 * Noise estimate used by the sampler: CFG combined with upsample guidance.
 * When w_t is zero no trained-resolution call is made and the result is the
 * CFG composite at the target resolution, bit for bit.
 */
inline Field guided_predict(const Predictor& p, const Field& x_t, int t, Condition c, const GuidanceConfig& cfg,
                            const NoiseSchedule& schedule, CallStats* stats = nullptr) {
  const double w_t = guidance_scale(t, schedule.steps(), cfg.ug_theta, cfg.ug_eta);
  if (w_t == 0.0) return detail::cfg_predict(p, x_t, t, c, cfg.cfg_scale, false, stats);

  if (cfg.composition == Composition::UgInsideCfg && c && cfg.cfg_scale != 0.0) {
    const LowResInput in = low_res_input(x_t, t, cfg, schedule);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.plan.n()));
    auto branch = [&](Condition bc) {
      const Field hi = detail::timed_predict(p, x_t, t, bc, false, stats);
      const Field low = scaled(s, detail::timed_predict(p, in.field, in.tau, bc, true, stats));
      return ug_combine(hi, low, w_t, cfg.plan);
    };
    const Field u = branch(std::nullopt);
    const Field k = branch(c);
    return cfg_combine(u, k, cfg.cfg_scale);
  }

  const Field eps = detail::cfg_predict(p, x_t, t, c, cfg.cfg_scale, false, stats);
  const Field low = adjusted_low_eps(p, x_t, t, c, cfg, schedule, stats);
  return ug_combine(eps, low, w_t, cfg.plan);
}

}  // namespace ug
