#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "ug/predictor.hpp"

namespace ug {

struct TrainingExample {
  Field x0;
  int t = 0;
  Field eps;
};

/*
 * Three-layer fully convolutional noise predictor.
 *
 *   input  : C data channels + 2 constant time channels (sqrt(a_t), sqrt(1 - a_t))
 *   conv1  : 3x3 periodic, (C+2) -> 8, tanh
 *   conv2  : 3x3 periodic, 8 -> 8, tanh
 *   conv3  : 3x3 periodic, 8 -> C (linear head)
 *
 * Parameters are one flat vector: for each layer the weights in
 * [out][in][ky][kx] order followed by the biases. For C = 1 the count is 881.
 * Any H, W >= 3 is accepted and the map commutes with periodic shifts.
 */
class ConvDenoiser final : public Predictor {
 public:
  static constexpr std::size_t kHidden = 8;
  static constexpr std::size_t kTaps = 9;

  struct Layer {
    std::size_t in, out, offset;
    std::size_t weights() const { return in * out * kTaps; }
    std::size_t count() const { return weights() + out; }
  };

  static std::array<Layer, 3> layers_for(std::size_t channels) {
    std::array<Layer, 3> l{};
    l[0] = {channels + 2, kHidden, 0};
    l[1] = {kHidden, kHidden, l[0].offset + l[0].count()};
    l[2] = {kHidden, channels, l[1].offset + l[1].count()};
    return l;
  }

  static std::size_t param_count(std::size_t channels) {
    const auto l = layers_for(channels);
    return l[2].offset + l[2].count();
  }

  ConvDenoiser(NoiseSchedule schedule, std::size_t channels, std::vector<double> params)
      : schedule_(std::move(schedule)), channels_(channels), layers_(layers_for(channels)), params_(std::move(params)) {
    if (channels_ == 0) throw ConfigError("conv denoiser needs at least one data channel");
    if (params_.size() != param_count(channels_))
      throw ConfigError("conv denoiser expects " + std::to_string(param_count(channels_)) + " parameters, got " +
                        std::to_string(params_.size()));
  }

  // Weights ~ N(0, 1/fan_in), zero biases.
  static ConvDenoiser random(NoiseSchedule schedule, std::size_t channels, RngStream& rng, double head_scale = 1.0) {
    const auto l = layers_for(channels);
    std::vector<double> p(param_count(channels), 0.0);
    for (std::size_t k = 0; k < l.size(); ++k) {
      const double scale = (k == 2 ? head_scale : 1.0) / std::sqrt(static_cast<double>(l[k].in * kTaps));
      for (std::size_t i = 0; i < l[k].weights(); ++i) p[l[k].offset + i] = scale * rng.normal();
    }
    return ConvDenoiser(std::move(schedule), channels, std::move(p));
  }

  const NoiseSchedule& schedule() const override { return schedule_; }
  std::size_t channels() const { return channels_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  const std::array<Layer, 3>& layers() const { return layers_; }

  std::string shape_family() const override {
    return std::to_string(channels_) + "-channel [H, W] fields with H, W >= 3";
  }

  struct Activations {
    Field input;   // data + time channels
    Field pre1, post1, pre2, post2;
    Field output;
  };

  Field predict(const Field& x, int t, Condition c) const override {
    check_condition(c);
    return forward(x, t).output;
  }

  Activations forward(const Field& x, int t) const {
    check_shape(x);
    const double alpha = schedule_.alpha(t);
    const std::size_t h = x.dims()[0], w = x.dims()[1], plane = h * w;
    Activations a;
    a.input = Field(Shape{channels_ + 2, {h, w}});
    std::copy(x.data().begin(), x.data().end(), a.input.data().begin());
    std::fill_n(a.input.data().begin() + static_cast<std::ptrdiff_t>(channels_ * plane), plane, std::sqrt(alpha));
    std::fill_n(a.input.data().begin() + static_cast<std::ptrdiff_t>((channels_ + 1) * plane), plane, std::sqrt(1.0 - alpha));
    a.pre1 = conv(layers_[0], a.input);
    a.post1 = apply_tanh(a.pre1);
    a.pre2 = conv(layers_[1], a.post1);
    a.post2 = apply_tanh(a.pre2);
    a.output = conv(layers_[2], a.post2);
    return a;
  }

  // Mean over the batch of |f(x_t, t) - eps|^2 / size, with x_t built from (x0, eps).
  double loss(std::span<const TrainingExample> batch) const {
    double total = 0.0;
    for (const auto& ex : batch) {
      const Field out = forward(noised(ex), ex.t).output;
      total += squared_distance(out, ex.eps) / static_cast<double>(out.size());
    }
    return total / static_cast<double>(batch.size());
  }

  // Loss and its exact gradient with respect to params().
  double loss_and_gradient(std::span<const TrainingExample> batch, std::vector<double>& grad) const {
    if (batch.empty()) throw ConfigError("empty training batch");
    grad.assign(params_.size(), 0.0);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
      require_same_shape(ex.x0, ex.eps, "training example");
      const Activations a = forward(noised(ex), ex.t);
      const double inv_size = 1.0 / static_cast<double>(a.output.size());
      total += squared_distance(a.output, ex.eps) * inv_size;

      Field d_out(a.output.shape());
      for (std::size_t i = 0; i < d_out.size(); ++i) d_out[i] = 2.0 * (a.output[i] - ex.eps[i]) * inv_size * inv_b;
      Field d_post2 = conv_backward(layers_[2], a.post2, d_out, grad, true);
      Field d_pre2 = tanh_backward(a.post2, d_post2);
      Field d_post1 = conv_backward(layers_[1], a.post1, d_pre2, grad, true);
      Field d_pre1 = tanh_backward(a.post1, d_post1);
      conv_backward(layers_[0], a.input, d_pre1, grad, false);
    }
    return total * inv_b;
  }

  /// One gradient-descent step; returns the loss before the update.
  double train_step(std::span<const TrainingExample> batch, double learn_rate) {
    std::vector<double> grad;
    const double l = loss_and_gradient(batch, grad);
    if (!std::isfinite(l)) throw NumericError("conv denoiser training diverged (loss is not finite)");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= learn_rate * grad[i];
    return l;
  }

  Field noised(const TrainingExample& ex) const {
    const double alpha = schedule_.alpha(ex.t);
    return linear_comb(std::sqrt(alpha), ex.x0, std::sqrt(1.0 - alpha), ex.eps);
  }

  /*
   * Parameter file, little-endian:
   *   bytes 0..3   magic "UGCD"
   *   bytes 4..7   uint32 format version (1)
   *   bytes 8..15  uint64 parameter count
   *   then count IEEE-754 binary64 values
   */
  static constexpr std::array<char, 4> kMagic = {'U', 'G', 'C', 'D'};
  static constexpr std::uint32_t kVersion = 1;

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os.write(kMagic.data(), 4);
    write_le(os, kVersion);
    write_le(os, static_cast<std::uint64_t>(params_.size()));
    for (double v : params_) write_le(os, std::bit_cast<std::uint64_t>(v));
  }

  static ConvDenoiser load(const std::filesystem::path& path, NoiseSchedule schedule) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path.string());
    std::array<char, 4> magic{};
    is.read(magic.data(), 4);
    if (!is || magic != kMagic) throw ConfigError(path.string() + ": not a conv denoiser parameter file");
    const auto version = read_le<std::uint32_t>(is);
    if (version != kVersion) throw ConfigError(path.string() + ": unsupported version " + std::to_string(version));
    const auto count = read_le<std::uint64_t>(is);
    std::size_t channels = 0;
    for (std::size_t c = 1; c <= 16; ++c)
      if (param_count(c) == count) channels = c;
    if (channels == 0) throw ConfigError(path.string() + ": parameter count " + std::to_string(count) + " matches no architecture");
    std::vector<double> p(count);
    for (auto& v : p) v = std::bit_cast<double>(read_le<std::uint64_t>(is));
    if (!is) throw ConfigError(path.string() + ": truncated parameter file");
    return ConvDenoiser(std::move(schedule), channels, std::move(p));
  }

 private:
  void check_shape(const Field& x) const {
    if (x.channels() != channels_ || x.dims().size() != 2 || x.dims()[0] < 3 || x.dims()[1] < 3) reject_shape(x);
  }

  static double squared_distance(const Field& a, const Field& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  }

  static Field apply_tanh(const Field& x) {
    Field y = x;
    for (auto& v : y.data()) v = std::tanh(v);
    return y;
  }

  static Field tanh_backward(const Field& post, const Field& d_post) {
    Field d = d_post;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - post[i] * post[i];
    return d;
  }

  Field conv(const Layer& l, const Field& in) const {
    const std::size_t h = in.dims()[0], w = in.dims()[1];
    Field out(Shape{l.out, {h, w}});
    const double* weights = params_.data() + l.offset;
    const double* bias = weights + l.weights();
    for (std::size_t o = 0; o < l.out; ++o) {
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(o, y, x) = bias[o];
      for (std::size_t i = 0; i < l.in; ++i) {
        const double* k = weights + (o * l.in + i) * kTaps;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double wv = k[ky * 3 + kx];
            if (wv == 0.0) continue;
            for (std::size_t y = 0; y < h; ++y) {
              const std::size_t sy = (y + h + ky - 1) % h;
              for (std::size_t x = 0; x < w; ++x) out.at(o, y, x) += wv * in.at(i, sy, (x + w + kx - 1) % w);
            }
          }
      }
    }
    return out;
  }

  // Accumulates parameter gradients into grad; returns d(loss)/d(in) when wanted.
  Field conv_backward(const Layer& l, const Field& in, const Field& d_out, std::vector<double>& grad, bool want_input) const {
    const std::size_t h = in.dims()[0], w = in.dims()[1];
    Field d_in = want_input ? Field(in.shape()) : Field();
    const double* weights = params_.data() + l.offset;
    double* g_w = grad.data() + l.offset;
    double* g_b = g_w + l.weights();
    for (std::size_t o = 0; o < l.out; ++o) {
      double sb = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) sb += d_out.at(o, y, x);
      g_b[o] += sb;
      for (std::size_t i = 0; i < l.in; ++i) {
        const std::size_t base = (o * l.in + i) * kTaps;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double wv = weights[base + ky * 3 + kx];
            double sw = 0.0;
            for (std::size_t y = 0; y < h; ++y) {
              const std::size_t sy = (y + h + ky - 1) % h;
              for (std::size_t x = 0; x < w; ++x) {
                const std::size_t sx = (x + w + kx - 1) % w;
                const double g = d_out.at(o, y, x);
                sw += g * in.at(i, sy, sx);
                if (want_input) d_in.at(i, sy, sx) += wv * g;
              }
            }
            g_w[base + ky * 3 + kx] += sw;
          }
      }
    }
    return d_in;
  }

  template <typename U>
  static void write_le(std::ostream& os, U v) {
    std::array<char, sizeof(U)> b{};
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
    os.write(b.data(), sizeof(U));
  }

  template <typename U>
  static U read_le(std::istream& is) {
    std::array<unsigned char, sizeof(U)> b{};
    is.read(reinterpret_cast<char*>(b.data()), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
  }

  NoiseSchedule schedule_;
  std::size_t channels_;
  std::array<Layer, 3> layers_;
  std::vector<double> params_;
};

}  // namespace ug
