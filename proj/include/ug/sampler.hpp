#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ug/guidance.hpp"

namespace ug {

enum class SamplerKind { Ancestral, Deterministic };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ancestral;
  std::vector<int> steps;     // strictly decreasing, first T-1 and last 0
  double eta_ddim = 0.0;      // stochasticity of the deterministic family
  int checkpoint_every = 0;   // 0 disables intermediate snapshots

  void validate(int T) const {
    if (steps.size() < 2) throw ConfigError("sampler needs at least two steps");
    if (steps.front() != T - 1 || steps.back() != 0)
      throw ConfigError("step sequence must run from T-1 = " + std::to_string(T - 1) + " down to 0");
    for (std::size_t i = 1; i < steps.size(); ++i)
      if (steps[i] >= steps[i - 1]) throw ConfigError("step sequence must be strictly decreasing");
    if (!(eta_ddim >= 0.0 && eta_ddim <= 1.0)) throw ConfigError("eta_ddim must lie in [0, 1]");
  }
};

inline std::vector<int> full_steps(int T) {
  std::vector<int> s(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) s[static_cast<std::size_t>(i)] = T - 1 - i;
  return s;
}

// `count` steps evenly spaced from T-1 down to 0.
inline std::vector<int> strided_steps(int T, int count) {
  if (count < 2 || count > T) throw ConfigError("strided step count must lie in [2, T]");
  std::vector<int> s;
  for (int i = 0; i < count; ++i) {
    const double v = static_cast<double>(T - 1) * (1.0 - static_cast<double>(i) / (count - 1));
    const int step = static_cast<int>(std::lround(v));
    if (s.empty() || step < s.back()) s.push_back(step);
  }
  return s;
}

inline Field predict_x0(const Field& x_t, const Field& eps_hat, int t, const NoiseSchedule& s) {
  const double a = s.alpha(t);
  return linear_comb(1.0 / std::sqrt(a), x_t, -std::sqrt(1.0 - a) / std::sqrt(a), eps_hat);
}

inline double ddpm_sigma(int t, int t_prev, const NoiseSchedule& s) {
  const double a = s.alpha(t), ap = s.alpha(t_prev);
  return std::sqrt(std::max(0.0, (1.0 - ap) / (1.0 - a) * (1.0 - a / ap)));
}

namespace detail {
inline void check_transition(int t, int t_prev) {
  if (!(t > t_prev && t_prev >= 0))
    throw ConfigError("invalid transition " + std::to_string(t) + " -> " + std::to_string(t_prev));
}

inline void add_noise(Field& x, double sigma, RngStream& rng) {
  if (sigma == 0.0) return;
  for (auto& v : x.data()) v += sigma * rng.normal();
}
}  // namespace detail

/// Ancestral step x_t -> x_{t_prev} using the Gaussian posterior q(x_prev | x_t, x0_hat).
/// No noise is injected when landing on step 0.
inline Field ddpm_step(const Field& x_t, const Field& eps_hat, int t, int t_prev, const NoiseSchedule& s, RngStream& rng) {
  detail::check_transition(t, t_prev);
  const double a = s.alpha(t), ap = s.alpha(t_prev);
  const double ratio = a / ap;
  const Field x0 = predict_x0(x_t, eps_hat, t, s);
  const double c0 = std::sqrt(ap) * (1.0 - ratio) / (1.0 - a);
  const double ct = std::sqrt(ratio) * (1.0 - ap) / (1.0 - a);
  Field out = linear_comb(c0, x0, ct, x_t);
  if (t_prev > 0) detail::add_noise(out, ddpm_sigma(t, t_prev, s), rng);
  return out;
}

/// DDIM step; eta_ddim = 0 is fully deterministic.
inline Field ddim_step(const Field& x_t, const Field& eps_hat, int t, int t_prev, const NoiseSchedule& s, double eta_ddim,
                       RngStream& rng) {
  detail::check_transition(t, t_prev);
  const double ap = s.alpha(t_prev);
  const double sigma = t_prev > 0 ? eta_ddim * ddpm_sigma(t, t_prev, s) : 0.0;
  const Field x0 = predict_x0(x_t, eps_hat, t, s);
  Field out = linear_comb(std::sqrt(ap), x0, std::sqrt(std::max(0.0, 1.0 - ap - sigma * sigma)), eps_hat);
  detail::add_noise(out, sigma, rng);
  return out;
}

struct NoisePair {
  Field hi;
  Field low;
};

/*
 * Paired initial noise across resolutions: hi keeps the fine detail of one
 * white draw and takes its block means from an independent low-resolution draw,
 * so D[hi] * sqrt(n) == low while every entry of hi stays standard normal.
 */
inline NoisePair init_noise_pair(const Shape& shape_hi, const ScalePlan& plan, RngStream& rng) {
  const Shape shape_low = plan.downsampled(shape_hi);
  const Field z_hi = gaussian_noise(shape_hi, rng);
  const Field z_low = gaussian_noise(shape_low, rng);
  const Field ud = upsample_nearest(downsample_box(z_hi, plan), plan);
  const Field uz = upsample_nearest(z_low, plan);
  const double s = 1.0 / std::sqrt(static_cast<double>(plan.n()));
  Field hi(shape_hi);
  for (std::size_t i = 0; i < hi.size(); ++i) hi[i] = z_hi[i] - ud[i] + s * uz[i];
  return {std::move(hi), z_low};
}

struct Trajectory {
  std::vector<std::pair<int, Field>> snapshots;
  Field x0;
  CallStats stats;
};

using StepObserver = std::function<void(int t, const Field& x_t)>;

/*
 * Runs the reverse process from x_T along cfg.steps. The RNG stream supplies
 * the ancestral noise only, so runs that differ only in guidance consume
 * identical draws.
 */
inline Trajectory sample_loop(const Predictor& p, const GuidanceConfig& gcfg, const SamplerConfig& scfg, Field x_T,
                              Condition cond, RngStream& rng, const StepObserver& observe = {}) {
  const NoiseSchedule& sched = p.schedule();
  gcfg.validate();
  scfg.validate(sched.steps());
  Trajectory traj;
  Field x = std::move(x_T);
  for (std::size_t i = 0; i + 1 < scfg.steps.size(); ++i) {
    const int t = scfg.steps[i], t_prev = scfg.steps[i + 1];
    if (scfg.checkpoint_every > 0 && i % static_cast<std::size_t>(scfg.checkpoint_every) == 0) traj.snapshots.emplace_back(t, x);
    if (observe) observe(t, x);
    const Field eps = guided_predict(p, x, t, cond, gcfg, sched, &traj.stats);
    x = scfg.kind == SamplerKind::Ancestral ? ddpm_step(x, eps, t, t_prev, sched, rng)
                                            : ddim_step(x, eps, t, t_prev, sched, scfg.eta_ddim, rng);
    if (!x.all_finite()) throw NumericError("sampler state became non-finite at step " + std::to_string(t_prev));
  }
  if (scfg.checkpoint_every > 0) traj.snapshots.emplace_back(0, x);
  traj.x0 = std::move(x);
  return traj;
}

/// Draws x_T from `rng` and runs sample_loop with the same stream.
inline Trajectory sample_loop(const Predictor& p, const GuidanceConfig& gcfg, const SamplerConfig& scfg, const Shape& shape,
                              Condition cond, RngStream& rng) {
  Field x_T = gaussian_noise(shape, rng);
  return sample_loop(p, gcfg, scfg, std::move(x_T), cond, rng);
}

}  // namespace ug
