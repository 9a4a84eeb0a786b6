#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "ug/error.hpp"

namespace ug {

// Cumulative signal coefficients alpha_t for t = 0..T-1; t = 0 is nearly clean.
class NoiseSchedule {
 public:
  static constexpr double kLogSnrClamp = 1e-7;

  explicit NoiseSchedule(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) throw ConfigError("noise schedule needs at least 2 steps");
    for (std::size_t t = 0; t < alpha_.size(); ++t) {
      const double a = alpha_[t];
      if (!(a > 0.0 && a < 1.0))
        throw ConfigError("alpha[" + std::to_string(t) + "] = " + std::to_string(a) + " outside (0, 1)");
      if (t > 0 && !(a < alpha_[t - 1]))
        throw ConfigError("alpha must be strictly decreasing (violated at t = " + std::to_string(t) + ")");
    }
    log_snr_.resize(alpha_.size());
    for (std::size_t t = 0; t < alpha_.size(); ++t) {
      const double a = std::clamp(alpha_[t], kLogSnrClamp, 1.0 - kLogSnrClamp);
      log_snr_[t] = std::log(a) - std::log1p(-a);
    }
  }

  int steps() const { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_[check(t)]; }
  double log_snr(int t) const { return log_snr_[check(t)]; }
  const std::vector<double>& alphas() const { return alpha_; }
  const std::vector<double>& log_snrs() const { return log_snr_; }

  std::size_t check(int t) const {
    if (t < 0 || t >= steps())
      throw ConfigError("step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + ")");
    return static_cast<std::size_t>(t);
  }

 private:
  std::vector<double> alpha_;
  std::vector<double> log_snr_;
};

inline NoiseSchedule make_linear_beta(int T, double beta_start, double beta_end) {
  if (T < 2) throw ConfigError("linear-beta schedule needs T >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("linear-beta schedule needs 0 < beta_start <= beta_end < 1");
  std::vector<double> alpha(static_cast<std::size_t>(T));
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    const double beta = beta_start + (beta_end - beta_start) * static_cast<double>(t) / static_cast<double>(T - 1);
    prod *= 1.0 - beta;
    alpha[static_cast<std::size_t>(t)] = prod;
  }
  return NoiseSchedule(std::move(alpha));
}

// Cosine schedule. The raw ratio lies in (0, 1]; it is squeezed affinely into
// [1e-5, 1 - 1e-5] so that strict monotonicity survives near both ends.
inline NoiseSchedule make_cosine(int T) {
  if (T < 2) throw ConfigError("cosine schedule needs T >= 2");
  constexpr double s = 0.008;
  constexpr double lo = 1e-5;
  auto f = [](double u) {
    const double c = std::cos((u + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> alpha(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double raw = f(static_cast<double>(t) / T) / f0;
    alpha[static_cast<std::size_t>(t)] = lo + (1.0 - 2.0 * lo) * raw;
  }
  return NoiseSchedule(std::move(alpha));
}

inline double snr(const NoiseSchedule& s, int t) {
  const double a = s.alpha(t);
  return a / (1.0 - a);
}

// Total power of D[x_t] for unit-power data and noise averaged over n entries.
inline double power_factor(const NoiseSchedule& s, int t, int n) {
  if (n < 1) throw ConfigError("averaging count n must be >= 1, got " + std::to_string(n));
  const double a = s.alpha(t);
  return a + (1.0 - a) / static_cast<double>(n);
}

/*
 * Step whose log-SNR is nearest to log(n * SNR(t)); ties go to the smaller
 * index. log_snr is strictly decreasing so the nearest neighbour is found by
 * bisection around the insertion point.
 */
inline int adjusted_time(const NoiseSchedule& s, int t, int n) {
  if (n < 1) throw ConfigError("averaging count n must be >= 1, got " + std::to_string(n));
  const auto& ls = s.log_snrs();
  const double target = ls[s.check(t)] + std::log(static_cast<double>(n));
  // First index whose log-SNR is <= target.
  const auto it = std::partition_point(ls.begin(), ls.end(), [&](double v) { return v > target; });
  const auto hi = static_cast<int>(it - ls.begin());
  if (hi == 0) return 0;
  if (hi == s.steps()) return s.steps() - 1;
  const double d_hi = std::abs(target - ls[static_cast<std::size_t>(hi)]);
  const double d_lo = std::abs(target - ls[static_cast<std::size_t>(hi - 1)]);
  return d_lo <= d_hi ? hi - 1 : hi;
}

// Fractional step with log-SNR exactly log(n * SNR(t)), by linear interpolation
// in log-SNR. Clamped to [0, T-1].
inline double adjusted_time_continuous(const NoiseSchedule& s, int t, int n) {
  if (n < 1) throw ConfigError("averaging count n must be >= 1, got " + std::to_string(n));
  const auto& ls = s.log_snrs();
  const double target = ls[s.check(t)] + std::log(static_cast<double>(n));
  const auto it = std::partition_point(ls.begin(), ls.end(), [&](double v) { return v > target; });
  const auto hi = static_cast<std::size_t>(it - ls.begin());
  if (hi == 0) return 0.0;
  if (hi == ls.size()) return static_cast<double>(ls.size() - 1);
  const double frac = (ls[hi - 1] - target) / (ls[hi - 1] - ls[hi]);
  return static_cast<double>(hi - 1) + frac;
}

struct TauRow {
  int t;
  int tau;
  double alpha_t;
  double alpha_tau;
  double power;
};

inline std::vector<TauRow> tau_table(const NoiseSchedule& s, int n) {
  std::vector<TauRow> rows;
  rows.reserve(static_cast<std::size_t>(s.steps()));
  for (int t = 0; t < s.steps(); ++t) {
    const int tau = adjusted_time(s, t, n);
    rows.push_back({t, tau, s.alpha(t), s.alpha(tau), power_factor(s, t, n)});
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].tau > rows[i].t) throw NumericError("tau table: tau > t at t = " + std::to_string(i));
    if (i > 0 && rows[i].tau < rows[i - 1].tau)
      throw NumericError("tau table: tau not monotone at t = " + std::to_string(i));
  }
  return rows;
}

}  // namespace ug
