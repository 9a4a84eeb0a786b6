#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "ug/fft.hpp"
#include "ug/predictor.hpp"
#include "ug/resample.hpp"

namespace ug {

/// Power spectrum of a stationary zero-mean Gaussian field on a periodic grid,
/// as a function of normalized frequency (cycles per sample, each axis in
/// [-1/2, 1/2)). Under the unitary DFT every mode has variance S(f), so the
/// per-entry variance is the mean of S over the grid.
using Spectrum = std::function<double(std::span<const double>)>;

inline Spectrum white_spectrum(double level = 1.0) {
  return [level](std::span<const double>) { return level; };
}

/// S(f) = amplitude / (1 + sum_a (f_a / cutoff_a)^2)^2.
inline Spectrum band_limited_spectrum(std::vector<double> cutoffs, double amplitude = 1.0) {
  for (double c : cutoffs)
    if (!(c > 0.0)) throw ConfigError("spectrum cutoff must be positive");
  return [cutoffs = std::move(cutoffs), amplitude](std::span<const double> f) {
    if (f.size() != cutoffs.size()) throw ShapeError("spectrum expects " + std::to_string(cutoffs.size()) + " axes");
    double r2 = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) r2 += (f[a] / cutoffs[a]) * (f[a] / cutoffs[a]);
    const double d = 1.0 + r2;
    return amplitude / (d * d);
  };
}

namespace detail {

inline double wrap_frequency(double f) {
  f -= std::floor(f + 0.5);
  return f;
}

// |(1/m) sum_{d<m} exp(2 pi i f d)|^2
inline double box_response(double f, std::size_t m) {
  const double s = std::sin(std::numbers::pi * f);
  if (std::abs(s) < 1e-14) return 1.0;
  const double r = std::sin(std::numbers::pi * static_cast<double>(m) * f) / (static_cast<double>(m) * s);
  return r * r;
}

}  // namespace detail

/// Spectrum of D[x] when x has spectrum `fine`: aliases of each coarse
/// frequency, weighted by the box-filter response, divided by n.
inline Spectrum coarsened_spectrum(Spectrum fine, const ScalePlan& plan) {
  return [fine = std::move(fine), factors = plan.factors(), n = plan.n()](std::span<const double> fc) {
    if (fc.size() != factors.size()) throw ShapeError("coarsened spectrum axis count mismatch");
    std::vector<std::size_t> j(factors.size(), 0);
    std::vector<double> f(factors.size());
    double total = 0.0;
    while (true) {
      double weight = 1.0;
      for (std::size_t a = 0; a < factors.size(); ++a) {
        f[a] = detail::wrap_frequency((fc[a] + static_cast<double>(j[a])) / static_cast<double>(factors[a]));
        weight *= detail::box_response(f[a], factors[a]);
      }
      total += weight * fine(std::span<const double>(f));
      std::size_t a = factors.size();
      while (a-- > 0) {
        if (++j[a] < factors[a]) break;
        j[a] = 0;
      }
      if (a == static_cast<std::size_t>(-1)) break;
    }
    return total / static_cast<double>(n);
  };
}

/// Draws a real Gaussian field whose unitary DFT modes have variance S(f).
inline Field sample_gaussian_field(const Spectrum& spectrum, const Shape& shape, RngStream& rng) {
  Field white = gaussian_noise(shape, rng);
  Field out(shape);
  const std::size_t plane = shape.plane();
  std::vector<double> amp(plane);
  fft::for_each_mode(shape.dims, [&](std::size_t i, std::span<const double> f) { amp[i] = std::sqrt(spectrum(f)); });
  for (std::size_t c = 0; c < shape.channels; ++c) {
    auto modes = fft::forward_plane(white, c);
    for (std::size_t i = 0; i < plane; ++i) modes[i] *= amp[i];
    fft::transform(modes, shape.dims, true);
    for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = modes[i].real();
  }
  return out;
}

/*
 * Wiener-optimal noise predictor for stationary Gaussian data with spectrum S.
 * Per mode: x0_hat = sqrt(a) S / (a S + 1 - a) * X_t and
 * eps_hat = (X_t - sqrt(a) x0_hat) / sqrt(1 - a) = sqrt(1 - a) / (a S + 1 - a) * X_t.
 * Accepts any grid whose axis lengths are powers of two.
 */
class SpectralGaussianDenoiser final : public Predictor {
 public:
  SpectralGaussianDenoiser(Spectrum spectrum, NoiseSchedule schedule, std::size_t axes)
      : spectrum_(std::move(spectrum)), schedule_(std::move(schedule)), axes_(axes) {}

  const Spectrum& spectrum() const { return spectrum_; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  std::string shape_family() const override {
    return "any " + std::to_string(axes_) + "-axis field with power-of-two axis lengths";
  }

  double wiener_gain(double s, double alpha) const { return std::sqrt(1.0 - alpha) / (alpha * s + 1.0 - alpha); }

  Field predict(const Field& x, int t, Condition c) const override {
    check_condition(c);
    if (x.dims().size() != axes_) reject_shape(x);
    for (auto d : x.dims())
      if (!fft::is_power_of_two(d)) reject_shape(x);
    const double alpha = schedule_.alpha(t);
    const std::size_t plane = x.shape().plane();
    std::vector<double> gain(plane);
    fft::for_each_mode(x.dims(), [&](std::size_t i, std::span<const double> f) { gain[i] = wiener_gain(spectrum_(f), alpha); });
    Field out(x.shape());
    for (std::size_t ch = 0; ch < x.channels(); ++ch) {
      auto modes = fft::forward_plane(x, ch);
      for (std::size_t i = 0; i < plane; ++i) modes[i] *= gain[i];
      fft::transform(modes, x.dims(), true);
      for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = modes[i].real();
    }
    return out;
  }

 private:
  Spectrum spectrum_;
  NoiseSchedule schedule_;
  std::size_t axes_;
};

}  // namespace ug
