#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ug/fft.hpp"

namespace ug {

enum class Provenance { Generated, Reference };

class SampleSet {
 public:
  SampleSet(std::vector<Field> samples, Provenance tag = Provenance::Generated)
      : samples_(std::move(samples)), tag_(tag) {
    if (samples_.empty()) throw ShapeError("sample set must be nonempty");
    for (const auto& s : samples_)
      if (s.shape() != samples_.front().shape())
        throw ShapeError("sample set shapes differ: " + samples_.front().shape().str() + " vs " + s.shape().str());
  }

  const std::vector<Field>& samples() const { return samples_; }
  const Field& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  const Shape& shape() const { return samples_.front().shape(); }
  Provenance provenance() const { return tag_; }

 private:
  std::vector<Field> samples_;
  Provenance tag_;
};

namespace detail {

// W1 between two empirical 1-D distributions given sorted values.
inline double wasserstein1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // Integrate |F_a^-1(u) - F_b^-1(u)| over the merged quantile breakpoints.
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next = std::min((i + 1) / na, (j + 1) / nb);
    total += (next - u) * std::abs(a[i] - b[j]);
    u = next;
    if ((i + 1) / na <= next) ++i;
    if ((j + 1) / nb <= next) ++j;
  }
  return total;
}

}  // namespace detail

/// Mean over random unit directions of the 1-D Wasserstein-1 distance between
/// the projected sample sets. Directions are drawn from `rng`, so equal streams
/// give equal directions.
inline double sliced_wasserstein(const SampleSet& a, const SampleSet& b, int projections, RngStream& rng) {
  if (a.shape() != b.shape())
    throw ShapeError("sliced_wasserstein: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  if (projections < 1) throw ConfigError("sliced_wasserstein needs at least one projection");
  const std::size_t dim = a.shape().size();
  std::vector<double> dir(dim), pa(a.size()), pb(b.size());
  double total = 0.0;
  for (int p = 0; p < projections; ++p) {
    double norm = 0.0;
    for (auto& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : dir) v /= norm;
    auto project = [&](const SampleSet& s, std::vector<double>& out) {
      for (std::size_t k = 0; k < s.size(); ++k) {
        double d = 0.0;
        for (std::size_t i = 0; i < dim; ++i) d += dir[i] * s[k][i];
        out[k] = d;
      }
      std::sort(out.begin(), out.end());
    };
    project(a, pa);
    project(b, pb);
    total += detail::wasserstein1_sorted(pa, pb);
  }
  return total / projections;
}

struct RadialSpectrum {
  std::vector<double> power;      // summed |X|^2 per band, averaged over samples
  std::vector<std::size_t> modes; // number of DFT modes in each band

  double per_mode(std::size_t band) const { return modes[band] ? power[band] / static_cast<double>(modes[band]) : 0.0; }
  double total() const {
    double s = 0.0;
    for (double p : power) s += p;
    return s;
  }
};

// Band of a mode: integer-rounded radius of its signed frequency vector.
inline std::vector<std::size_t> radial_bands(const Dims& dims) {
  std::vector<std::size_t> band(dims_volume(dims));
  fft::for_each_mode(dims, [&](std::size_t i, std::span<const double> f) {
    double r2 = 0.0;
    for (std::size_t a = 0; a < dims.size(); ++a) {
      const double k = f[a] * static_cast<double>(dims[a]);
      r2 += k * k;
    }
    band[i] = static_cast<std::size_t>(std::lround(std::sqrt(r2)));
  });
  return band;
}

/// Mean squared unitary-DFT magnitude binned by integer radius. Channels are
/// summed. The total over bands equals the mean squared norm of the samples.
inline RadialSpectrum radial_power_spectrum(const SampleSet& set) {
  const Shape& shape = set.shape();
  if (shape.dims.size() != 2 || shape.dims[0] != shape.dims[1])
    throw ShapeError("radial spectrum needs square 2-D fields, got " + shape.str());
  fft::require_power_of_two(shape.dims, "radial_power_spectrum");
  const auto band = radial_bands(shape.dims);
  const std::size_t nbands = *std::max_element(band.begin(), band.end()) + 1;
  RadialSpectrum out{std::vector<double>(nbands, 0.0), std::vector<std::size_t>(nbands, 0)};
  for (auto b : band) ++out.modes[b];
  for (const auto& x : set.samples())
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const auto modes = fft::forward_plane(x, c);
      for (std::size_t i = 0; i < modes.size(); ++i) out.power[band[i]] += std::norm(modes[i]);
    }
  for (auto& p : out.power) p /= static_cast<double>(set.size());
  return out;
}

struct MomentReport {
  Field mean;       // per-entry mean over samples
  Field variance;   // per-entry population variance over samples
  double global_mean = 0.0;
  double global_variance = 0.0;  // pooled over all entries of all samples
};

inline MomentReport moment_report(const SampleSet& set) {
  const double k = static_cast<double>(set.size());
  MomentReport r{Field(set.shape()), Field(set.shape())};
  for (const auto& x : set.samples())
    for (std::size_t i = 0; i < x.size(); ++i) r.mean[i] += x[i];
  for (auto& v : r.mean.data()) v /= k;
  for (const auto& x : set.samples())
    for (std::size_t i = 0; i < x.size(); ++i) r.variance[i] += (x[i] - r.mean[i]) * (x[i] - r.mean[i]);
  for (auto& v : r.variance.data()) v /= k;

  std::vector<double> pooled;
  pooled.reserve(set.size() * set.shape().size());
  for (const auto& x : set.samples()) pooled.insert(pooled.end(), x.data().begin(), x.data().end());
  const Moments m = field_moments(pooled);
  r.global_mean = m.mean;
  r.global_variance = m.variance;
  return r;
}

struct MetricRow {
  std::string metric;
  double value;
  std::size_t n_samples;
  std::uint64_t seed;
};

inline void write_metric_rows(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "metric,value,n_samples,seed\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << r.metric << ',' << buf << ',' << r.n_samples << ',' << r.seed << '\n';
  }
}

}  // namespace ug
