#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ug/core.hpp"

namespace ug::fft {

using Complex = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void require_power_of_two(const Dims& dims, const char* who) {
  for (std::size_t a = 0; a < dims.size(); ++a)
    if (!is_power_of_two(dims[a]))
      throw ShapeError(std::string(who) + ": axis " + std::to_string(a) + " has length " + std::to_string(dims[a]) +
                       ", expected a power of two");
}

// In-place iterative radix-2 transform of a strided line.
inline void transform_line(Complex* base, std::size_t n, std::size_t stride, bool inverse) {
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(base[i * stride], base[j * stride]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const Complex w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        Complex& a = base[(start + k) * stride];
        Complex& b = base[(start + k + half) * stride];
        const Complex t = w * b;
        b = a - t;
        a += t;
      }
    }
  }
}

/// Unitary N-d DFT over one channel plane laid out row-major with `dims`.
/// Sum of |X|^2 equals sum of |x|^2.
inline void transform(std::vector<Complex>& plane, const Dims& dims, bool inverse) {
  require_power_of_two(dims, "fft");
  const std::size_t total = dims_volume(dims);
  std::size_t stride = total;
  for (std::size_t axis = 0; axis < dims.size(); ++axis) {
    const std::size_t n = dims[axis];
    stride /= n;
    const std::size_t block = n * stride;
    for (std::size_t outer = 0; outer < total; outer += block)
      for (std::size_t inner = 0; inner < stride; ++inner) transform_line(plane.data() + outer + inner, n, stride, inverse);
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(total));
  for (auto& v : plane) v *= norm;
}

inline std::vector<Complex> forward_plane(const Field& x, std::size_t channel) {
  const std::size_t plane = x.shape().plane();
  std::vector<Complex> out(plane);
  for (std::size_t i = 0; i < plane; ++i) out[i] = x[channel * plane + i];
  transform(out, x.dims(), false);
  return out;
}

// Signed integer frequency of index i on an axis of length n, in [-n/2, n/2).
inline long signed_frequency(std::size_t i, std::size_t n) {
  return i < (n + 1) / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

// Calls fn(flat_index, normalized_frequency) for every mode of `dims`.
// Normalized frequencies are in cycles per sample, each component in [-1/2, 1/2).
template <typename Fn>
void for_each_mode(const Dims& dims, Fn&& fn) {
  const std::size_t total = dims_volume(dims);
  std::vector<std::size_t> idx(dims.size(), 0);
  std::vector<double> freq(dims.size());
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (std::size_t a = 0; a < dims.size(); ++a)
      freq[a] = static_cast<double>(signed_frequency(idx[a], dims[a])) / static_cast<double>(dims[a]);
    fn(flat, std::span<const double>(freq));
    for (std::size_t a = dims.size(); a-- > 0;) {
      if (++idx[a] < dims[a]) break;
      idx[a] = 0;
    }
  }
}

}  // namespace ug::fft
