#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "ug/metrics.hpp"
#include "ug/spectral.hpp"

using namespace ug;

namespace {

std::vector<Field> white_set(RngStream& rng, int count, Dims dims, double scale = 1.0, double shift = 0.0) {
  std::vector<Field> out;
  for (int i = 0; i < count; ++i) {
    Field f = gaussian_noise(1, dims, rng);
    for (auto& v : f.data()) v = scale * v + shift;
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST(Wasserstein, EqualSizeSortedMatching) {
  EXPECT_DOUBLE_EQ(detail::wasserstein1_sorted({0, 1, 2}, {1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(detail::wasserstein1_sorted({0, 0}, {0, 4}), 2.0);
}

// Unequal sizes: compare against the integral of |F_a - F_b| over a fine grid.
TEST(Wasserstein, UnequalSizesMatchCdfIntegral) {
  const std::vector<double> a = {-1.0, 0.5, 2.0}, b = {0.0, 0.25, 1.0, 3.0, 3.5};
  auto cdf = [](const std::vector<double>& v, double x) {
    return double(std::upper_bound(v.begin(), v.end(), x) - v.begin()) / double(v.size());
  };
  double integral = 0.0;
  const double lo = -2.0, hi = 4.0, dx = 1e-5;
  for (double x = lo + dx / 2; x < hi; x += dx) integral += std::abs(cdf(a, x) - cdf(b, x)) * dx;
  EXPECT_NEAR(detail::wasserstein1_sorted(a, b), integral, 1e-4);
}

TEST(Wasserstein, SlicedIsZeroOnIdenticalSetsAndDetectsShift) {
  RngStream rng(81, 0);
  const auto a = white_set(rng, 64, {4, 4});
  RngStream d1(9, 0), d2(9, 0);
  EXPECT_EQ(sliced_wasserstein(SampleSet(a), SampleSet(a), 32, d1), 0.0);
  auto shifted = a;
  for (auto& f : shifted)
    for (auto& v : f.data()) v += 0.5;
  // Shifting every entry by c moves each projection by c * sum(dir), whose mean |.| over
  // random unit directions in d = 16 dimensions is c * sqrt(2/pi) (approximately).
  const double sw = sliced_wasserstein(SampleSet(a), SampleSet(shifted), 2000, d2);
  EXPECT_NEAR(sw, 0.5 * std::sqrt(2.0 / std::numbers::pi), 0.03);
}

TEST(Wasserstein, SameStreamSameValue) {
  RngStream rng(82, 0);
  const auto a = white_set(rng, 16, {4, 4}), b = white_set(rng, 16, {4, 4}, 2.0);
  RngStream d1(3, 0), d2(3, 0);
  EXPECT_EQ(sliced_wasserstein(SampleSet(a), SampleSet(b), 10, d1), sliced_wasserstein(SampleSet(a), SampleSet(b), 10, d2));
}

TEST(Wasserstein, ShapeMismatchThrows) {
  RngStream rng(83, 0);
  RngStream d(1, 0);
  EXPECT_THROW(sliced_wasserstein(SampleSet(white_set(rng, 4, {4, 4})), SampleSet(white_set(rng, 4, {2, 2})), 4, d), ShapeError);
  EXPECT_THROW(SampleSet({Field(Shape{1, {2}}), Field(Shape{1, {3}})}), ShapeError);
  EXPECT_THROW(SampleSet({}), ShapeError);
}

TEST(RadialSpectrum, ParsevalOnBandSums) {
  RngStream rng(84, 0);
  const auto set = white_set(rng, 8, {16, 16}, 0.7);
  const RadialSpectrum s = radial_power_spectrum(SampleSet(set));
  double mean_sq = 0.0;
  for (const auto& f : set) mean_sq += squared_norm(f) / double(set.size());
  EXPECT_NEAR(s.total(), mean_sq, 1e-9);
  std::size_t modes = 0;
  for (auto m : s.modes) modes += m;
  EXPECT_EQ(modes, 256u);
}

TEST(RadialSpectrum, BandsMatchIntegerRadius) {
  const auto band = radial_bands({8, 8});
  // index (row 1, col 7): frequencies (1, -1) -> radius sqrt(2) -> band 1
  EXPECT_EQ(band[1 * 8 + 7], 1u);
  // (4, 4): (-4, -4) -> 5.66 -> band 6
  EXPECT_EQ(band[4 * 8 + 4], 6u);
  EXPECT_EQ(band[0], 0u);
}

TEST(RadialSpectrum, WhiteNoiseIsFlatPerMode) {
  RngStream rng(85, 0);
  const RadialSpectrum s = radial_power_spectrum(SampleSet(white_set(rng, 400, {16, 16})));
  for (std::size_t b = 1; b < s.power.size(); ++b) {
    const double tol = 5.0 * std::sqrt(1.0 / (400.0 * double(s.modes[b]))) + 1e-3;
    EXPECT_NEAR(s.per_mode(b), 1.0, std::max(tol, 0.05)) << "band " << b;
  }
}

TEST(RadialSpectrum, RejectsNonSquare) {
  EXPECT_THROW(radial_power_spectrum(SampleSet({Field(Shape{1, {8, 16}})})), ShapeError);
  EXPECT_THROW(radial_power_spectrum(SampleSet({Field(Shape{1, {12, 12}})})), ShapeError);
}

TEST(Moments, PerEntryAndPooled) {
  const Field a(Shape{1, {2}}, {1.0, 2.0}), b(Shape{1, {2}}, {3.0, 6.0});
  const MomentReport r = moment_report(SampleSet({a, b}));
  EXPECT_EQ(r.mean.values(), (std::vector<double>{2.0, 4.0}));
  EXPECT_EQ(r.variance.values(), (std::vector<double>{1.0, 4.0}));
  EXPECT_DOUBLE_EQ(r.global_mean, 3.0);
  EXPECT_DOUBLE_EQ(r.global_variance, (4 + 1 + 0 + 9) / 4.0);
}

TEST(MetricRows, CsvLayout) {
  std::ostringstream os;
  write_metric_rows(os, {{"sw", 0.125, 256, 3}, {"var", 1.0 / 3.0, 256, 3}});
  EXPECT_EQ(os.str(), "metric,value,n_samples,seed\nsw,0.125,256,3\nvar,0.33333333333333331,256,3\n");
}
