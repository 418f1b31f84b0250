#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pmrep/elliptic.hpp"

using namespace pmrep;

namespace {

// Direct O(n^2) midpoint sum, independent of the recursive evaluation.
std::vector<double> direct_convolution(double eps, const SignedGridMeasure& m) {
  const Grid1D& g = m.grid;
  std::vector<double> out(g.size(), 0.0);
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) out[i] += green_kernel(eps, g.node(i) - g.node(j)) * m.weights[j];
    for (const auto& a : m.atoms) out[i] += green_kernel(eps, g.node(i) - a.position) * a.mass;
  }
  return out;
}

SignedGridMeasure random_measure(const Grid1D& g, RandomStream& rng, int atoms) {
  SignedGridMeasure m(g);
  for (double& w : m.weights) w = (rng.uniform() - 0.5) * 0.1;
  for (int a = 0; a < atoms; ++a) m.atoms.push_back({g.half_width() * (2 * rng.uniform() - 1), rng.uniform() - 0.5});
  return m;
}

}  // namespace

TEST(GreenKernel, ValuesAtZero) {
  EXPECT_DOUBLE_EQ(green_kernel(1.0, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(green_kernel(4.0, 0.0), 0.25);
  EXPECT_THROW(green_kernel(0.0, 1.0), Error);
  EXPECT_THROW(green_kernel(-1.0, 1.0), Error);
}

TEST(GreenKernel, DecaysAndIntegratesToInverseEps) {
  double prev = green_kernel(1.0, 0.0);
  for (double x = 0.5; x < 40.0; x += 0.5) {
    const double v = green_kernel(1.0, x);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-17);
  for (double eps : {0.25, 1.0, 3.0}) {
    const double integral = 2.0 * oracle::simpson([eps](double x) { return green_kernel(eps, x); }, 0.0, 60.0 / std::sqrt(eps), 20000);
    EXPECT_NEAR(integral, 1.0 / eps, 1e-9);
  }
}

TEST(GreenKernel, MatchesHeatSemigroupIntegral) {
  // K(x) = (4 pi)^{-1/2} int_0^inf t^{-1/2} exp(-x^2/(4t) - eps t) dt, with t = s^2.
  for (double eps : {0.5, 2.0}) {
    for (double x : {0.3, 1.0, 2.5}) {
      const double integral = oracle::simpson(
          [&](double s) { return s == 0.0 ? 0.0 : 2.0 * std::exp(-x * x / (4 * s * s) - eps * s * s); }, 0.0, 12.0, 40000);
      EXPECT_NEAR(integral / std::sqrt(4.0 * std::numbers::pi), green_kernel(eps, x), 1e-9);
    }
  }
}

TEST(ApplyBEps, DiracAndZero) {
  const Grid1D g(6.0, 61);
  const auto v = apply_B_eps(1.0, SignedGridMeasure::dirac(g, 0.0));
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(v.values[i], green_kernel(1.0, g.node(i)), 1e-15);
  EXPECT_NEAR(std::sqrt(1.0) * norm_linf(v), 0.5, 1e-15);
  EXPECT_EQ(norm_linf(apply_B_eps(2.0, SignedGridMeasure(g))), 0.0);
  EXPECT_THROW(apply_B_eps(0.0, SignedGridMeasure(g)), Error);
}

TEST(ApplyBEps, MatchesDirectSum) {
  const Grid1D g(5.0, 128);
  RandomStream rng(StreamId{8, stream_tag::kTestData, 0});
  for (double eps : {0.01, 1.0, 10.0}) {
    const auto m = random_measure(g, rng, 3);
    const auto fast = apply_B_eps(eps, m);
    const auto slow = direct_convolution(eps, m);
    for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(fast.values[i], slow[i], 1e-12 * (1.0 + std::abs(slow[i])));
  }
}

TEST(ApplyBEps, LinearSymmetricAndBounded) {
  const Grid1D g(4.0, 96);
  RandomStream rng(StreamId{9, stream_tag::kTestData, 0});
  for (int trial = 0; trial < 20; ++trial) {
    const double eps = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
    const auto m1 = random_measure(g, rng, 2);
    const auto m2 = random_measure(g, rng, 1);
    const auto b1 = apply_B_eps(eps, m1);
    const auto b2 = apply_B_eps(eps, m2);
    SignedGridMeasure sum(g);
    for (int i = 0; i < g.size(); ++i) sum.weights[i] = 2 * m1.weights[i] + m2.weights[i];
    for (const auto& a : m1.atoms) sum.atoms.push_back({a.position, 2 * a.mass});
    for (const auto& a : m2.atoms) sum.atoms.push_back(a);
    const auto bs = apply_B_eps(eps, sum);
    for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(bs.values[i], 2 * b1.values[i] + b2.values[i], 1e-12);

    // Symmetry of the bilinear form (cell parts only: atoms are evaluated off-grid).
    SignedGridMeasure c1 = m1, c2 = m2;
    c1.atoms.clear();
    c2.atoms.clear();
    const auto bc1 = apply_B_eps(eps, c1), bc2 = apply_B_eps(eps, c2);
    double ab = 0, ba = 0;
    for (int i = 0; i < g.size(); ++i) {
      ab += bc1.values[i] * c2.weights[i];
      ba += bc2.values[i] * c1.weights[i];
    }
    EXPECT_NEAR(ab, ba, 1e-12);
    EXPECT_LE(std::sqrt(eps) * norm_linf(b1), total_variation(m1) / 2 + 1e-10);
  }
}

TEST(EllipticResidual, DiracSolutionIsConsistent) {
  const Grid1D g(20.0, 1024);
  const auto m = SignedGridMeasure::dirac(g, 0.0);
  const auto v = apply_B_eps(1.0, m);
  EXPECT_LE(elliptic_residual(1.0, m, v), 10.0 * g.h());
  EXPECT_EQ(elliptic_residual(1.0, SignedGridMeasure(g), GridDensity(g)), 0.0);
}

TEST(EllipticResidual, GrowsLinearlyUnderConstantShift) {
  const Grid1D g(20.0, 512);
  const auto m = SignedGridMeasure(g);
  GridDensity v(g);
  for (double& x : v.values) x = 0.3;
  // Interior nodes only: n - 2 cells of width h.
  EXPECT_NEAR(elliptic_residual(2.0, m, v), 2.0 * 0.3 * (g.size() - 2) * g.h(), 1e-10);
}

TEST(EllipticResidual, ConvergesUnderRefinement) {
  // Smooth source: m = Gaussian density, residual of the midpoint convolution shrinks with h.
  double prev = 0.0;
  for (int n : {128, 256, 512, 1024}) {
    const Grid1D g(12.0, n);
    const auto m = SignedGridMeasure::from_density(
        GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0.0, 0.5); }));
    const double r = elliptic_residual(1.0, m, apply_B_eps(1.0, m));
    if (prev > 0.0) {
      EXPECT_LT(r, 0.6 * prev) << "n=" << n;
    }
    prev = r;
  }
}

TEST(GEps, ZeroDiracAndDipole) {
  const Grid1D g(5.0, 50);
  EXPECT_EQ(g_eps_functional(1.0, SignedGridMeasure(g)), 0.0);
  for (double eps : {0.1, 1.0, 7.0}) {
    EXPECT_NEAR(g_eps_functional(eps, SignedGridMeasure::dirac(g, 0.3)), 0.5 / std::sqrt(eps), 1e-14);
    SignedGridMeasure dipole(g);
    dipole.atoms = {{0.7, 1.0}, {-1.1, -1.0}};
    const double expected = 2.0 * (green_kernel(eps, 0.0) - green_kernel(eps, 1.8));
    EXPECT_NEAR(g_eps_functional(eps, dipole), expected, 1e-14);
    EXPECT_GT(expected, 0.0);
  }
}

TEST(GEps, NonNegativeOnRandomMeasures) {
  const Grid1D g(6.0, 200);
  RandomStream rng(StreamId{10, stream_tag::kTestData, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const double eps = std::pow(10.0, 3.0 * rng.uniform() - 2.0);
    const auto z = random_measure(g, rng, trial % 4);
    EXPECT_GE(g_eps_functional(eps, z), -g_eps_tolerance(eps, z));
  }
}
