#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pmrep/grid.hpp"

using namespace pmrep;

TEST(Grid1D, NodesSymmetricAndIncreasing) {
  const Grid1D g(3.0, 12);
  EXPECT_DOUBLE_EQ(g.h(), 0.5);
  for (int i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g.node(i), -g.node(g.size() - 1 - i), 1e-15);
    if (i > 0) {
      EXPECT_GT(g.node(i), g.node(i - 1));
    }
  }
  EXPECT_THROW(Grid1D(1.0, 4), Error);
  EXPECT_THROW(Grid1D(0.0, 16), Error);
}

TEST(Mass, UniformZeroAndGaussian) {
  const Grid1D g(4.0, 64);
  const auto uniform = GridDensity::sample(g, [](double) { return 1.0 / 8.0; });
  EXPECT_NEAR(mass(uniform), 1.0, 1e-14);
  EXPECT_EQ(mass(GridDensity(g)), 0.0);
  const auto gauss = GridDensity::sample(Grid1D(8.0, 512), [](double x) { return oracle::gaussian_density(x, 0, 1); });
  EXPECT_NEAR(mass(gauss), 1.0, 1e-6);
}

TEST(Norms, SingleCellIndicator) {
  const Grid1D g(2.0, 8);  // h = 0.5
  GridDensity d(g);
  d.values[3] = 2.0;
  EXPECT_DOUBLE_EQ(norm_linf(d), 2.0);
  EXPECT_DOUBLE_EQ(norm_l1(d), 1.0);
  EXPECT_DOUBLE_EQ(norm_l2(d), std::sqrt(2.0));
  const GridDensity zero(g);
  EXPECT_EQ(norm_linf(zero), 0.0);
  EXPECT_EQ(norm_l1(zero), 0.0);
  EXPECT_EQ(norm_l2(zero), 0.0);
}

TEST(Norms, Homogeneity) {
  const Grid1D g(5.0, 100);
  auto d = GridDensity::sample(g, [](double x) { return std::exp(-x * x) * (1.0 + 0.3 * std::sin(3 * x)); });
  const double linf = norm_linf(d), l1 = norm_l1(d), l2 = norm_l2(d);
  d *= 3.0;
  EXPECT_NEAR(norm_linf(d), 3.0 * linf, 1e-14);
  EXPECT_NEAR(norm_l1(d), 3.0 * l1, 1e-14);
  EXPECT_NEAR(norm_l2(d), 3.0 * l2, 1e-14);
}

TEST(TotalVariation, AtomsAndSignedWeights) {
  const Grid1D g(2.0, 8);
  EXPECT_DOUBLE_EQ(total_variation(SignedGridMeasure::dirac(g, 0.0)), 1.0);
  SignedGridMeasure m(g);
  m.weights[2] = 1.0;
  m.weights[5] = -1.0;
  EXPECT_DOUBLE_EQ(total_variation(m), 2.0);

  const auto a = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, -0.5, 0.3); });
  const auto b = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0.7, 0.5); });
  EXPECT_LE(total_variation(SignedGridMeasure::from_density(a) - SignedGridMeasure::from_density(b)), 2.0);
  // The induced measure of a nonnegative density has total variation equal to its mass.
  EXPECT_NEAR(total_variation(SignedGridMeasure::from_density(a)), mass(a), 1e-15);
}

TEST(Distances, IdenticalAndTranslatedPointMasses) {
  const Grid1D g(4.0, 80);
  const auto a = GridDensity::sample(g, [](double x) { return std::exp(-x * x); });
  EXPECT_EQ(l1_distance(a, a), 0.0);
  EXPECT_EQ(wasserstein1(a, a), 0.0);

  GridDensity p(g), q(g);
  p.values[10] = 1.0 / g.h();
  q.values[47] = 1.0 / g.h();
  EXPECT_NEAR(wasserstein1(p, q), std::abs(g.node(47) - g.node(10)), g.h());
  EXPECT_THROW(l1_distance(a, GridDensity(Grid1D(4.0, 40))), Error);
}

TEST(Distances, GaussianTranslation) {
  const Grid1D g(10.0, 2000);
  const auto a = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0.0, 1.0); });
  const auto b = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0.5, 1.0); });
  EXPECT_NEAR(wasserstein1(a, b), 0.5, 2.0 * g.h());
}

TEST(Distances, ZeroW1IffZeroL1) {
  const Grid1D g(3.0, 30);
  RandomStream rng(StreamId{5, stream_tag::kTestData, 0});
  for (int trial = 0; trial < 50; ++trial) {
    GridDensity a(g), b(g);
    for (int i = 0; i < g.size(); ++i) a.values[i] = b.values[i] = rng.uniform();
    EXPECT_EQ(wasserstein1(a, b), 0.0);
    b.values[static_cast<int>(rng.uniform() * g.size())] += 0.1;
    EXPECT_GT(wasserstein1(a, b), 0.0);
    EXPECT_GT(l1_distance(a, b), 0.0);
  }
}

TEST(Kde, SingleParticleIsGaussianKernel) {
  const Grid1D g(4.0, 81);  // odd: node at 0
  const double sigma = 0.3;
  const std::vector<double> one{0.0};
  const auto d = kde_density(one, sigma, g);
  EXPECT_NEAR(norm_linf(d), 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi)), 1e-14);
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(d.values[i], oracle::gaussian_density(g.node(i), 0, sigma * sigma), 1e-14);
  const std::vector<double> many(37, 0.0);
  const auto dm = kde_density(many, sigma, g);
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(dm.values[i], d.values[i], 1e-14);
}

TEST(Kde, LinearInEmpiricalMeasureAndTranslationEquivariant) {
  const Grid1D g(5.0, 200);
  const std::vector<double> a{-1.0, 0.3, 0.8}, b{1.2, -0.4};
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const auto da = kde_density(a, 0.2, g), db = kde_density(b, 0.2, g), dab = kde_density(ab, 0.2, g);
  for (int i = 0; i < g.size(); ++i) EXPECT_NEAR(dab.values[i], (3 * da.values[i] + 2 * db.values[i]) / 5, 1e-13);
  std::vector<double> shifted = a;
  for (double& x : shifted) x += 4 * g.h();
  const auto ds = kde_density(shifted, 0.2, g);
  for (int i = 20; i < g.size() - 20; ++i) EXPECT_NEAR(ds.values[i + 4], da.values[i], 1e-12);
}

TEST(Kde, MonteCarloGaussianL1) {
  const Grid1D g(8.0, 512);
  RandomStream rng(StreamId{2024, stream_tag::kTestData, 0});
  std::vector<double> xs(100000);
  for (double& x : xs) x = rng.normal();
  const auto d = kde_density(xs, silverman_bandwidth(xs), g);
  const auto exact = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0, 1); });
  EXPECT_LE(l1_distance(d, exact), 0.05);
  EXPECT_GE(mass(d), 1.0 - 1e-6);
  EXPECT_LE(mass(d), 1.0 + 1e-6);
  EXPECT_GE(min_value(d), 0.0);
}

TEST(SampleInitial, ConcentratedCell) {
  const Grid1D g(2.0, 16);
  GridDensity u0(g);
  u0.values[5] = 1.0 / g.h();
  const auto e = sample_initial(u0, 1000, 7);
  for (double x : e.positions) {
    EXPECT_GE(x, g.left_edge(5));
    EXPECT_LE(x, g.left_edge(6));
  }
}

TEST(SampleInitial, UniformPassesKolmogorovSmirnov) {
  const Grid1D g(1.0, 64);
  const auto u0 = GridDensity::sample(g, [](double) { return 0.5; });
  const std::size_t n = 10000;
  const auto e = sample_initial(u0, n, 11);
  const double ks = oracle::ks_statistic(e.positions, [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); });
  EXPECT_LE(ks, 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(SampleInitial, ReproducibleAndRejectsBadInput) {
  const Grid1D g(4.0, 64);
  const auto u0 = GridDensity::sample(g, [](double x) { return oracle::gaussian_density(x, 0, 0.5); });
  const auto a = sample_initial(u0, 500, 123);
  const auto b = sample_initial(u0, 500, 123);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_NE(a.positions, sample_initial(u0, 500, 124).positions);
  EXPECT_THROW(sample_initial(u0, 0, 1), Error);
  try {
    sample_initial(GridDensity(g), 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroMass);
  }
}

TEST(Restriction, PreservesMass) {
  const Grid1D fine(6.0, 256), coarse(6.0, 64);
  const auto d = GridDensity::sample(fine, [](double x) { return oracle::gaussian_density(x, 0.2, 0.7); });
  EXPECT_NEAR(mass(restrict_to(d, coarse)), mass(d), 1e-14);
  EXPECT_THROW(restrict_to(d, Grid1D(5.0, 64)), Error);
}
