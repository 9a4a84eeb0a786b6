#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ug/error.hpp"

namespace ug {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_volume(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

struct Shape {
  std::size_t channels = 1;
  Dims dims;

  std::size_t plane() const { return dims_volume(dims); }
  std::size_t size() const { return channels * plane(); }
  std::string str() const { return "(" + std::to_string(channels) + ", [" + dims_to_string(dims) + "])"; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline void check_positive(const Shape& s) {
  if (s.channels == 0 || s.dims.empty())
    throw ShapeError("shape " + s.str() + " must have channels and at least one axis");
  for (auto d : s.dims)
    if (d == 0) throw ShapeError("shape " + s.str() + " has a zero-length axis");
}

// Multi-axis real field, channels-first, row-major over the axes.
class Field {
 public:
  Field() = default;

  explicit Field(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_positive(shape_);
    data_.assign(shape_.size(), fill);
  }

  Field(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_positive(shape_);
    if (data_.size() != shape_.size())
      throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
  }

  static Field zeros(std::size_t channels, Dims dims) { return Field(Shape{channels, std::move(dims)}); }
  static Field constant(std::size_t channels, Dims dims, double v) { return Field(Shape{channels, std::move(dims)}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  const Dims& dims() const { return shape_.dims; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D accessor for (channel, row, col) on [H, W] fields.
  double& at(std::size_t c, std::size_t r, std::size_t col) { return data_[(c * shape_.dims[0] + r) * shape_.dims[1] + col]; }
  double at(std::size_t c, std::size_t r, std::size_t col) const { return data_[(c * shape_.dims[0] + r) * shape_.dims[1] + col]; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_same_shape(const Field& x, const Field& y, const char* what) {
  if (x.shape() != y.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + x.shape().str() + " vs " + y.shape().str());
}

inline Field linear_comb(double a, const Field& x, double b, const Field& y) {
  require_same_shape(x, y, "linear_comb");
  Field out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

inline Field scaled(double a, const Field& x) {
  Field out = x;
  for (auto& v : out.data()) v *= a;
  return out;
}

inline Field operator+(const Field& x, const Field& y) { return linear_comb(1.0, x, 1.0, y); }
inline Field operator-(const Field& x, const Field& y) { return linear_comb(1.0, x, -1.0, y); }

inline double squared_norm(const Field& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return s;
}

inline double rms_difference(const Field& x, const Field& y) {
  require_same_shape(x, y, "rms_difference");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double max_abs_difference(const Field& x, const Field& y) {
  require_same_shape(x, y, "max_abs_difference");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

// Population mean and variance over all entries.
inline Moments field_moments(std::span<const double> v) {
  if (v.empty()) throw ShapeError("field_moments: empty field");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, var / n};
}

inline Moments field_moments(const Field& x) { return field_moments(x.data()); }

/*
 * Counter-based generator (Philox4x32-10). A stream is keyed by (seed, stream id);
 * the i-th block of output depends only on (seed, stream id, i), so independent
 * trajectories can be given disjoint streams without any shared state.
 */
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::array<std::uint32_t, 4> next_block() {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    ++counter_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  // Uniform in (0, 1), 53-bit resolution.
  double uniform() {
    if (!have_uniform_) {
      const auto b = next_block();
      pending_uniform_ = to_unit((std::uint64_t{b[2]} << 32) | b[3]);
      have_uniform_ = true;
      return to_unit((std::uint64_t{b[0]} << 32) | b[1]);
    }
    have_uniform_ = false;
    return pending_uniform_;
  }

  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return pending_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * 3.14159265358979323846 * u2;
    pending_normal_ = r * std::sin(phi);
    have_normal_ = true;
    return r * std::cos(phi);
  }

 private:
  static double to_unit(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  bool have_uniform_ = false;
  bool have_normal_ = false;
  double pending_uniform_ = 0.0;
  double pending_normal_ = 0.0;
};

inline Field gaussian_noise(const Shape& shape, RngStream& rng) {
  check_positive(shape);
  Field out(shape);
  for (auto& v : out.data()) v = rng.normal();
  return out;
}

inline Field gaussian_noise(std::size_t channels, Dims dims, RngStream& rng) {
  return gaussian_noise(Shape{channels, std::move(dims)}, rng);
}

}  // namespace ug
