#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ug/core.hpp"

namespace ug {

// Per-axis integer scale factors; n is the number of entries averaged by D.
class ScalePlan {
 public:
  ScalePlan() = default;

  explicit ScalePlan(std::vector<std::size_t> factors) : factors_(std::move(factors)) {
    for (std::size_t a = 0; a < factors_.size(); ++a)
      if (factors_[a] == 0) throw ConfigError("scale factor on axis " + std::to_string(a) + " must be positive");
  }

  static ScalePlan uniform(std::size_t axes, std::size_t m) { return ScalePlan(std::vector<std::size_t>(axes, m)); }

  const std::vector<std::size_t>& factors() const { return factors_; }
  std::size_t axes() const { return factors_.size(); }

  int n() const {
    std::size_t p = 1;
    for (auto f : factors_) p *= f;
    return static_cast<int>(p);
  }

  bool is_identity() const { return n() == 1; }

  Dims downsampled(const Dims& dims) const {
    check_axes(dims);
    Dims out(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) {
      if (dims[a] % factors_[a] != 0)
        throw ShapeError("axis " + std::to_string(a) + " of length " + std::to_string(dims[a]) +
                         " is not divisible by factor " + std::to_string(factors_[a]));
      out[a] = dims[a] / factors_[a];
    }
    return out;
  }

  Dims upsampled(const Dims& dims) const {
    check_axes(dims);
    Dims out(dims.size());
    for (std::size_t a = 0; a < dims.size(); ++a) out[a] = dims[a] * factors_[a];
    return out;
  }

  Shape downsampled(const Shape& s) const { return {s.channels, downsampled(s.dims)}; }
  Shape upsampled(const Shape& s) const { return {s.channels, upsampled(s.dims)}; }

  std::string str() const { return dims_to_string(factors_); }

 private:
  void check_axes(const Dims& dims) const {
    if (dims.size() != factors_.size())
      throw ShapeError("scale plan has " + std::to_string(factors_.size()) + " factors but field has " +
                       std::to_string(dims.size()) + " axes");
  }

  std::vector<std::size_t> factors_;
};

namespace detail {

// For each fine-grid entry of one channel plane, the flat index of its coarse block.
inline std::vector<std::size_t> block_index_map(const Dims& fine, const ScalePlan& plan) {
  const Dims coarse = plan.downsampled(fine);
  const std::size_t total = dims_volume(fine);
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(fine.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t c = 0;
    for (std::size_t a = 0; a < fine.size(); ++a) c = c * coarse[a] + idx[a] / plan.factors()[a];
    map[flat] = c;
    for (std::size_t a = fine.size(); a-- > 0;) {
      if (++idx[a] < fine[a]) break;
      idx[a] = 0;
    }
  }
  return map;
}

}  // namespace detail

/// Block average (operator D): each output entry is the mean of its n source entries.
inline Field downsample_box(const Field& x, const ScalePlan& plan) {
  const Shape out_shape = plan.downsampled(x.shape());
  if (plan.is_identity()) return x;
  const auto map = detail::block_index_map(x.dims(), plan);
  const std::size_t fine_plane = x.shape().plane();
  const std::size_t coarse_plane = out_shape.plane();
  Field out(out_shape);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < fine_plane; ++i) out[c * coarse_plane + map[i]] += x[c * fine_plane + i];
  const auto n = static_cast<double>(plan.n());
  for (auto& v : out.data()) v /= n;
  return out;
}

/// Nearest-neighbour replication (operator U). D[U[x]] == x.
inline Field upsample_nearest(const Field& x, const ScalePlan& plan) {
  const Shape out_shape = plan.upsampled(x.shape());
  if (plan.is_identity()) return x;
  const auto map = detail::block_index_map(out_shape.dims, plan);
  const std::size_t fine_plane = out_shape.plane();
  const std::size_t coarse_plane = x.shape().plane();
  Field out(out_shape);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t i = 0; i < fine_plane; ++i) out[c * fine_plane + i] = x[c * coarse_plane + map[i]];
  return out;
}

}  // namespace ug
