#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nslg/grid.hpp"

using namespace nslg;

namespace {

ScalarField scalar(const Grid& g, auto fn) {
  return ScalarField::generate(g, [&](const std::array<double, 3>& x) { return fn(x); });
}

ScalarField random_trig(const Grid& g, std::uint64_t seed, int kmax) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ScalarField f(g);
  for (int k1 = -kmax; k1 <= kmax; ++k1)
    for (int k2 = (g.dim() > 1 ? -kmax : 0); k2 <= (g.dim() > 1 ? kmax : 0); ++k2) {
      double a = nd(rng), b = nd(rng);
      for (std::size_t p = 0; p < g.size(); ++p) {
        auto x = g.point(p);
        double ph = k1 * x[0] + k2 * x[1];
        f[0][p] += a * std::cos(ph) + b * std::sin(ph);
      }
    }
  return f;
}

}  // namespace

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid(2, {7, 8, 8}), std::invalid_argument);
  EXPECT_THROW(Grid(2, {6, 6, 6}), std::invalid_argument);
  EXPECT_THROW(Grid(4, {8, 8, 8}), std::invalid_argument);
  Grid g(2, {16, 32, 1});
  EXPECT_EQ(g.size(), 16u * 32u);
  EXPECT_DOUBLE_EQ(g.spacing(1) * g.n(1), kTwoPi);
}

TEST(Grid, DerivativeOfSine) {
  Grid g = Grid::cube(1, 32);
  auto f = scalar(g, [](auto x) { return std::sin(x[0]); });
  auto d = spectral_derivative(f, 0, 1);
  auto ref = scalar(g, [](auto x) { return std::cos(x[0]); });
  EXPECT_LE(max_abs_diff(d, ref), 1e-12);
}

TEST(Grid, DerivativeOfConstantIsZero) {
  Grid g = Grid::cube(3, 8);
  ScalarField f(g, 3.7);
  for (int a = 0; a < 3; ++a)
    for (int o = 1; o <= 3; ++o) EXPECT_LE(max_abs(spectral_derivative(f, a, o)), 1e-13);
}

TEST(Grid, MixedModeSecondDerivative) {
  Grid g = Grid::cube(2, 32);
  auto f = scalar(g, [](auto x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]); });
  auto d = spectral_derivative(f, 1, 2);
  auto ref = scalar(g, [](auto x) { return -4.0 * std::sin(3 * x[0]) * std::cos(2 * x[1]); });
  EXPECT_LE(max_abs_diff(d, ref), 1e-11);
}

TEST(Grid, AxisOutOfRange) {
  Grid g = Grid::cube(2, 8);
  ScalarField f(g);
  EXPECT_THROW(spectral_derivative(f, 2, 1), std::invalid_argument);
}

TEST(Grid, NyquistZeroedForOddOrder) {
  Grid g = Grid::cube(1, 8);
  auto f = scalar(g, [](auto x) { return std::cos(4 * x[0]); });
  EXPECT_LE(max_abs(spectral_derivative(f, 0, 1)), 1e-14);
  auto d2 = spectral_derivative(f, 0, 2);
  EXPECT_NEAR(d2[0][0], -16.0, 1e-12);
}

TEST(Grid, InnerProducts) {
  Grid g1 = Grid::cube(1, 16);
  auto s = scalar(g1, [](auto x) { return std::sin(x[0]); });
  auto c = scalar(g1, [](auto x) { return std::cos(x[0]); });
  EXPECT_NEAR(inner_product_l2(s, s), std::numbers::pi, 1e-13);
  EXPECT_NEAR(inner_product_l2(s, c), 0.0, 1e-14);
  Grid g3 = Grid::cube(3, 8);
  ScalarField one(g3, 1.0);
  EXPECT_NEAR(inner_product_l2(one, one), std::pow(kTwoPi, 3), 1e-10);
}

TEST(Grid, SobolevNorms) {
  Grid g = Grid::cube(1, 32);
  ScalarField zero(g);
  EXPECT_EQ(sobolev_norm_sq(zero, 4), 0.0);
  auto s = scalar(g, [](auto x) { return std::sin(x[0]); });
  EXPECT_NEAR(sobolev_norm_sq(s, 1), 2.0 * std::numbers::pi, 1e-12);
  // high-precision quadrature oracle: 18.849555921538759430775860299677
  auto w = scalar(g, [](auto x) { return 2.0 + std::sin(x[0]); });
  EXPECT_NEAR(sobolev_norm_sq(s, 2, &w), 18.849555921538759430775860299677, 1e-11);
  EXPECT_THROW(sobolev_norm_sq(s, 7), std::invalid_argument);
}

TEST(Grid, SpatialMean) {
  Grid g = Grid::cube(2, 16);
  EXPECT_NEAR(spatial_mean(ScalarField(g, 2.5))[0], 2.5, 1e-15);
  EXPECT_NEAR(spatial_mean(scalar(g, [](auto x) { return std::sin(x[0]); }))[0], 0.0, 1e-14);
  EXPECT_NEAR(spatial_mean(scalar(g, [](auto x) { return 1.0 + 0.3 * std::cos(2 * x[0]); }))[0], 1.0, 1e-13);
}

TEST(GridInvariants, DerivativeExactnessBelowCutoff) {
  Grid g = Grid::cube(2, 32);
  for (int k = 1; k <= 10; ++k) {
    auto f = scalar(g, [k](auto x) { return std::cos(k * x[0] + 2 * x[1]); });
    auto ref = scalar(g, [k](auto x) { return -k * std::sin(k * x[0] + 2 * x[1]); });
    EXPECT_LE(max_abs_diff(spectral_derivative(f, 0, 1), ref), 1e-11 * k);
  }
}

TEST(GridInvariants, IntegrationByParts) {
  Grid g = Grid::cube(2, 32);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto f = random_trig(g, seed, 5);
    auto h = random_trig(g, seed + 100, 5);
    double lhs = inner_product_l2(spectral_derivative(f, 0, 1), h) + inner_product_l2(f, spectral_derivative(h, 0, 1));
    double scale = std::sqrt(inner_product_l2(f, f) * inner_product_l2(h, h));
    EXPECT_LE(std::abs(lhs), 1e-11 * scale);
  }
}

TEST(GridInvariants, Parseval) {
  for (int dim = 1; dim <= 3; ++dim) {
    Grid g = Grid::cube(dim, dim == 3 ? 8 : 16);
    std::mt19937_64 rng(dim);
    std::uniform_real_distribution<double> u(-1, 1);
    ScalarField f(g);
    for (auto& x : f[0]) x = u(rng);
    double phys = inner_product_l2(f, f);
    EXPECT_NEAR(modal_l2_sq(f), phys, 1e-12 * phys);
  }
}

TEST(GridInvariants, NormMonotone) {
  Grid g = Grid::cube(2, 16);
  auto f = random_trig(g, 3, 4);
  for (int s = 0; s < 6; ++s) EXPECT_LE(sobolev_norm_sq(f, s), sobolev_norm_sq(f, s + 1));
}

TEST(GridInvariants, MultiIndexCount) {
  EXPECT_EQ(multi_indices(1, 3).size(), 4u);
  EXPECT_EQ(multi_indices(2, 3).size(), 10u);
  EXPECT_EQ(multi_indices(3, 2).size(), 10u);
}

TEST(GridInvariants, DealiasMaskKeepsLowModes) {
  Grid g = Grid::cube(2, 32);
  auto lo = scalar(g, [](auto x) { return std::sin(10 * x[0]) + std::cos(3 * x[1]); });
  auto hi = scalar(g, [](auto x) { return std::sin(11 * x[0]); });
  auto a = lo;
  dealias(a);
  EXPECT_LE(max_abs_diff(a, lo), 1e-13);
  dealias(hi);
  EXPECT_LE(max_abs(hi), 1e-13);
}

TEST(GridInvariants, InterpolationAtOffGridPoint) {
  Grid g = Grid::cube(2, 16);
  auto f = scalar(g, [](auto x) { return std::sin(2 * x[0] - x[1]) + 0.5 * std::cos(3 * x[1]); });
  std::array<double, 3> x{0.123, 4.567, 0.0};
  EXPECT_NEAR(interpolate(g, g.forward(f[0]), x), std::sin(2 * x[0] - x[1]) + 0.5 * std::cos(3 * x[1]), 1e-13);
}
