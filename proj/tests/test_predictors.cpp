#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ug/conv_denoiser.hpp"
#include "ug/dataset_denoiser.hpp"
#include "ug/spectral.hpp"

using namespace ug;

namespace {

const NoiseSchedule& sched() {
  static const NoiseSchedule s = make_linear_beta(1000, 1e-4, 0.02);
  return s;
}

}  // namespace

// ---- dataset posterior --------------------------------------------------

TEST(DatasetDenoiser, TwoPointPosteriorMatchesClosedForm) {
  RngStream rng(21, 0);
  const Field a = gaussian_noise(1, {4, 4}, rng), b = gaussian_noise(1, {4, 4}, rng);
  const DatasetDenoiser p({a, b}, sched());
  for (int q = 0; q < 200; ++q) {
    const int t = static_cast<int>(rng.uniform() * 1000);
    const Field& x0 = rng.uniform() < 0.5 ? a : b;
    const Field x = linear_comb(std::sqrt(sched().alpha(t)), x0, std::sqrt(1 - sched().alpha(t)), gaussian_noise(x0.shape(), rng));
    const Field got = p.posterior_mean(x, t, std::nullopt);
    const Field want = oracle::two_point_posterior(x, a, b, sched().alpha(t));
    ASSERT_LE(max_abs_difference(got, want), 1e-12) << "t=" << t;
  }
}

TEST(DatasetDenoiser, NoisePredictionInvertsForwardProcess) {
  RngStream rng(22, 0);
  const Field item = gaussian_noise(1, {3, 3}, rng);
  const DatasetDenoiser p({item}, sched());
  const Field eps = gaussian_noise(item.shape(), rng);
  for (int t : {5, 300, 999}) {
    const double a = sched().alpha(t);
    const Field x = linear_comb(std::sqrt(a), item, std::sqrt(1 - a), eps);
    EXPECT_LE(max_abs_difference(p.predict(x, t, std::nullopt), eps), 1e-9);
  }
}

TEST(DatasetDenoiser, ConditionRestrictsPosterior) {
  const Field a = Field::constant(1, {2, 2}, 1.0), b = Field::constant(1, {2, 2}, -1.0);
  const DatasetDenoiser p({a, b}, sched(), {0, 1});
  const Field x = Field::constant(1, {2, 2}, 0.3);
  EXPECT_EQ(p.posterior_mean(x, 500, 0), a);
  EXPECT_EQ(p.posterior_mean(x, 500, 1), b);
  EXPECT_THROW(p.posterior_mean(x, 500, 2), ConfigError);
  EXPECT_EQ(p.num_classes(), 2);
}

TEST(DatasetDenoiser, EmptyClassIsReported) {
  const Field a = Field::constant(1, {2, 2}, 1.0);
  const DatasetDenoiser p({a}, sched(), {0}, 3);
  EXPECT_THROW(p.posterior_mean(a, 10, 2), ConfigError);
}

TEST(DatasetDenoiser, AcceptsIntegerRelatedShapes) {
  RngStream rng(23, 0);
  const Field item = gaussian_noise(1, {4, 4}, rng);
  const DatasetDenoiser p({item}, sched());
  // At t = 0 the posterior is concentrated on the single (resized) item.
  EXPECT_LE(max_abs_difference(p.posterior_mean(Field(Shape{1, {2, 2}}), 0, std::nullopt),
                               downsample_box(item, ScalePlan({2, 2}))), 1e-15);
  EXPECT_LE(max_abs_difference(p.posterior_mean(Field(Shape{1, {8, 4}}), 0, std::nullopt),
                               upsample_nearest(item, ScalePlan({2, 1}))), 1e-15);
  EXPECT_THROW(p.predict(Field(Shape{1, {3, 4}}), 0, std::nullopt), ShapeError);
  EXPECT_THROW(p.predict(Field(Shape{2, {4, 4}}), 0, std::nullopt), ShapeError);
}

TEST(DatasetDenoiser, LargeDistancesStayFinite) {
  const Field a = Field::constant(1, {8, 8}, 50.0), b = Field::constant(1, {8, 8}, -50.0);
  const DatasetDenoiser p({a, b}, sched());
  const Field m = p.posterior_mean(Field::constant(1, {8, 8}, 10.0), 0, std::nullopt);
  EXPECT_TRUE(m.all_finite());
  EXPECT_EQ(m, a);
}

// ---- spectral Wiener ----------------------------------------------------

TEST(SpectralDenoiser, MatchesPerModeWienerArithmetic) {
  RngStream rng(24, 0);
  const Spectrum s = band_limited_spectrum({0.2, 0.3}, 2.0);
  const SpectralGaussianDenoiser p(s, sched(), 2);
  for (int t : {0, 10, 250, 600, 999}) {
    const Field x = gaussian_noise(2, {8, 16}, rng);
    EXPECT_LE(max_abs_difference(p.predict(x, t, std::nullopt), oracle::wiener_eps(s, sched().alpha(t), x)), 1e-10) << t;
  }
}

TEST(SpectralDenoiser, WhiteSpectrumIsScalarGain) {
  RngStream rng(25, 0);
  const SpectralGaussianDenoiser p(white_spectrum(1.0), sched(), 2);
  const Field x = gaussian_noise(1, {8, 8}, rng);
  const double a = sched().alpha(400);
  EXPECT_LE(max_abs_difference(p.predict(x, 400, std::nullopt), scaled(std::sqrt(1 - a), x)), 1e-12);
}

TEST(SpectralDenoiser, RejectsUnsupportedInput) {
  const SpectralGaussianDenoiser p(white_spectrum(), sched(), 2);
  EXPECT_THROW(p.predict(Field(Shape{1, {6, 8}}), 0, std::nullopt), ShapeError);
  EXPECT_THROW(p.predict(Field(Shape{1, {8}}), 0, std::nullopt), ShapeError);
  EXPECT_THROW(p.predict(Field(Shape{1, {8, 8}}), 0, 0), ConfigError);
}

TEST(SpectralDenoiser, SampledFieldsHaveRequestedModeVariance) {
  RngStream rng(26, 0);
  const Spectrum s = band_limited_spectrum({0.25, 0.25});
  const std::size_t n = 16;
  const int draws = 400;
  std::vector<double> acc(n * n, 0.0);
  for (int d = 0; d < draws; ++d) {
    const Field x = sample_gaussian_field(s, Shape{1, {n, n}}, rng);
    const auto modes = oracle::dft2(x, 0);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::norm(modes[i]) / draws;
  }
  // Pooled over all modes the relative error of the mean is ~ 1/sqrt(draws * modes).
  double ratio = 0.0;
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      const double f[2] = {oracle::freq(k1, n), oracle::freq(k2, n)};
      ratio += acc[k1 * n + k2] / s(std::span<const double>(f, 2)) / double(n * n);
    }
  EXPECT_NEAR(ratio, 1.0, 0.02);
}

// Exact covariance propagation through the box filter on a small grid: the
// mode variances of D[x] equal the coarsened spectrum.
TEST(SpectralDenoiser, CoarsenedSpectrumIsExactPushforward) {
  const Spectrum fine = band_limited_spectrum({0.15, 0.3});
  const ScalePlan plan({2, 2});
  const Spectrum coarse = coarsened_spectrum(fine, plan);
  const std::size_t H = 8, W = 8, h = 4, w = 4;
  // Covariance of x in real space: C[p][q] = (1/N) sum_k S(k) e^{2 pi i k (p - q)}.
  std::vector<double> cov(H * W * H * W, 0.0);
  for (std::size_t p = 0; p < H * W; ++p)
    for (std::size_t q = 0; q < H * W; ++q) {
      double c = 0.0;
      for (std::size_t k1 = 0; k1 < H; ++k1)
        for (std::size_t k2 = 0; k2 < W; ++k2) {
          const double f[2] = {oracle::freq(k1, H), oracle::freq(k2, W)};
          const double dr = double(p / W) - double(q / W), dc = double(p % W) - double(q % W);
          c += fine(std::span<const double>(f, 2)) * std::cos(2 * std::numbers::pi * (double(k1) * dr / H + double(k2) * dc / W));
        }
      cov[p * H * W + q] = c / double(H * W);
    }
  // Variance of coarse mode (k1, k2) of D[x]: v^H C_d v with v the DFT row.
  for (std::size_t k1 = 0; k1 < h; ++k1)
    for (std::size_t k2 = 0; k2 < w; ++k2) {
      std::vector<oracle::cplx> v(H * W);  // DFT row pulled back through D
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
          v[r * W + c] = std::polar(1.0, -2 * std::numbers::pi * (double(k1 * (r / 2)) / h + double(k2 * (c / 2)) / w)) /
                         (4.0 * std::sqrt(double(h * w)));
      oracle::cplx var = 0;
      for (std::size_t p = 0; p < H * W; ++p)
        for (std::size_t q = 0; q < H * W; ++q) var += v[p] * std::conj(v[q]) * cov[p * H * W + q];
      const double f[2] = {oracle::freq(k1, h), oracle::freq(k2, w)};
      EXPECT_NEAR(var.real(), coarse(std::span<const double>(f, 2)), 1e-12) << k1 << "," << k2;
    }
}

// ---- conv denoiser ------------------------------------------------------

namespace {

std::vector<TrainingExample> small_batch(RngStream& rng, std::size_t channels, int count) {
  std::vector<TrainingExample> b;
  for (int i = 0; i < count; ++i)
    b.push_back({gaussian_noise(channels, {5, 6}, rng), static_cast<int>(rng.uniform() * 1000),
                 gaussian_noise(channels, {5, 6}, rng)});
  return b;
}

}  // namespace

TEST(ConvDenoiser, ParameterCount) {
  EXPECT_EQ(ConvDenoiser::param_count(1), 881u);
  EXPECT_EQ(ConvDenoiser::param_count(3), (5 * 8 * 9 + 8) + (8 * 8 * 9 + 8) + (8 * 3 * 9 + 3));
  EXPECT_THROW(ConvDenoiser(sched(), 1, std::vector<double>(880)), ConfigError);
}

TEST(ConvDenoiser, GradientMatchesCentralDifferences) {
  RngStream rng(27, 0);
  ConvDenoiser net = ConvDenoiser::random(sched(), 2, rng);
  const auto batch = small_batch(rng, 2, 2);
  std::vector<double> grad;
  net.loss_and_gradient(batch, grad);
  for (int k = 0; k < 30; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(grad.size()));
    const double h = 1e-5, keep = net.params()[i];
    net.mutable_params()[i] = keep + h;
    const double up = net.loss(batch);
    net.mutable_params()[i] = keep - h;
    const double down = net.loss(batch);
    net.mutable_params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    EXPECT_LE(std::abs(fd - grad[i]), 1e-4 * std::max(1e-3, std::abs(fd))) << "param " << i;
  }
}

TEST(ConvDenoiser, CommutesWithPeriodicShift) {
  RngStream rng(28, 0);
  const ConvDenoiser net = ConvDenoiser::random(sched(), 1, rng);
  const Field x = gaussian_noise(1, {6, 7}, rng);
  Field shifted(x.shape());
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 7; ++c) shifted.at(0, (r + 1) % 6, (c + 3) % 7) = x.at(0, r, c);
  const Field a = net.predict(x, 100, std::nullopt), b = net.predict(shifted, 100, std::nullopt);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 7; ++c) EXPECT_NEAR(b.at(0, (r + 1) % 6, (c + 3) % 7), a.at(0, r, c), 1e-12);
}

TEST(ConvDenoiser, TrainingReducesLoss) {
  RngStream rng(29, 0);
  ConvDenoiser net = ConvDenoiser::random(sched(), 1, rng, 0.1);
  const auto batch = small_batch(rng, 1, 4);
  const double before = net.loss(batch);
  for (int i = 0; i < 50; ++i) net.train_step(batch, 0.05);
  EXPECT_LT(net.loss(batch), before);
}

TEST(ConvDenoiser, DivergenceIsNumericError) {
  RngStream rng(30, 0);
  ConvDenoiser net = ConvDenoiser::random(sched(), 1, rng);
  net.mutable_params()[0] = std::nan("");
  const auto batch = small_batch(rng, 1, 1);
  EXPECT_THROW(net.train_step(batch, 0.1), NumericError);
}

TEST(ConvDenoiser, SaveLoadRoundTripAndByteLayout) {
  RngStream rng(31, 0);
  const ConvDenoiser net = ConvDenoiser::random(sched(), 1, rng);
  const auto path = std::filesystem::temp_directory_path() / "ug_conv_roundtrip.bin";
  net.save(path);
  EXPECT_EQ(std::filesystem::file_size(path), 16u + 8u * 881u);
  std::ifstream is(path, std::ios::binary);
  unsigned char head[16];
  is.read(reinterpret_cast<char*>(head), 16);
  EXPECT_EQ(std::string(reinterpret_cast<char*>(head), 4), "UGCD");
  EXPECT_EQ(head[4], 1);
  EXPECT_EQ(head[8] | (head[9] << 8), 881);
  const ConvDenoiser back = ConvDenoiser::load(path, sched());
  EXPECT_EQ(back.params(), net.params());
  EXPECT_EQ(back.channels(), 1u);
  std::filesystem::remove(path);
}

TEST(ConvDenoiser, LoadRejectsMalformedFiles) {
  const auto path = std::filesystem::temp_directory_path() / "ug_conv_bad.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE0000";
  }
  EXPECT_THROW(ConvDenoiser::load(path, sched()), ConfigError);
  {
    std::ofstream os(path, std::ios::binary);
    os.write("UGCD\x01\0\0\0\x71\x03\0\0\0\0\0\0", 16);  // count 881, no payload
  }
  EXPECT_THROW(ConvDenoiser::load(path, sched()), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(ConvDenoiser::load(path, sched()), ConfigError);
}

TEST(ConvDenoiser, RejectsWrongChannelCount) {
  RngStream rng(32, 0);
  const ConvDenoiser net = ConvDenoiser::random(sched(), 1, rng);
  EXPECT_THROW(net.predict(Field(Shape{2, {4, 4}}), 0, std::nullopt), ShapeError);
  EXPECT_THROW(net.predict(Field(Shape{1, {2, 4}}), 0, std::nullopt), ShapeError);
}
