#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "pmrep/mckean_sde.hpp"

using namespace pmrep;

namespace {

const Grid1D kGrid(8.0, 512);

GridDensity gaussian_u0(double variance = 0.25) {
  return GridDensity::sample(kGrid, [variance](double x) { return oracle::gaussian_density(x, 0.0, variance); });
}

SDEConfig base_config(std::size_t n, double dt = 1e-3, double t_final = 1.0) {
  SDEConfig cfg;
  cfg.n_particles = n;
  cfg.dt = dt;
  cfg.t_final = t_final;
  cfg.kde_grid = kGrid;
  return cfg;
}

// Brownian run shared by the variance, martingale and moment tests.
class BrownianRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto chi = CoefficientField::constant(kGrid, 1.0, 1.0);
    run_ = std::make_unique<SdeRun>(simulate_decoupled(chi, gaussian_u0(), base_config(100000)));
  }
  static void TearDownTestSuite() { run_.reset(); }
  static std::unique_ptr<SdeRun> run_;
};

std::unique_ptr<SdeRun> BrownianRun::run_;

}  // namespace

TEST(CoefficientField, PiecewiseConstantInTimeLinearInSpace) {
  const Grid1D g(2.0, 8);  // nodes -1.75, -1.25, ..., 1.75
  Field2D v(3, g.size());
  for (int i = 0; i < g.size(); ++i) {
    v(0, i) = 0.0;
    v(1, i) = i;
    v(2, i) = 10.0 + i;
  }
  const CoefficientField c(g, {0.0, 0.5, 1.0}, v);
  EXPECT_EQ(c.row_at(0.0), 0);
  EXPECT_EQ(c.row_at(0.2), 1);
  EXPECT_EQ(c.row_at(0.5), 1);
  EXPECT_EQ(c.row_at(0.5000001), 2);
  EXPECT_EQ(c.row_at(7.0), 2);
  EXPECT_DOUBLE_EQ(c(0.3, g.node(3)), 3.0);
  EXPECT_DOUBLE_EQ(c(0.3, 0.5 * (g.node(3) + g.node(4))), 3.5);
  EXPECT_DOUBLE_EQ(c(0.3, -100.0), 0.0);
  EXPECT_DOUBLE_EQ(c(0.3, 100.0), 7.0);
  EXPECT_DOUBLE_EQ(c(0.9, g.node(2) + 0.25 * g.h()), 12.25);
  EXPECT_THROW(CoefficientField(g, {0.0, 1.0}, v), Error);
}

TEST(SDEConfig, Validation) {
  auto cfg = base_config(10);
  EXPECT_NO_THROW(cfg.validate());
  cfg.n_particles = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = base_config(10);
  cfg.dt = -1e-3;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = base_config(10);
  cfg.epsilon_reg = -0.1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = base_config(10, 0.3, 1.0);
  EXPECT_THROW(cfg.validate(), Error);
}

TEST_F(BrownianRun, VarianceMatchesBrownianMotion) {
  // Y_t ~ N(0, 0.25 + t); the sample variance of 1e5 draws has standard error ~0.0056 at t = 1.
  EXPECT_NEAR(run_->final().variance, 1.25, 0.02);
  for (const auto& s : run_->snapshots) EXPECT_NEAR(s.variance, 0.25 + s.time, 0.02) << "t=" << s.time;
  EXPECT_TRUE(run_->warnings.empty());
}

TEST_F(BrownianRun, ZeroDriftWithinMartingaleBound) {
  const auto& y0 = run_->snapshots.front().positions;
  const double n = static_cast<double>(y0.size());
  for (const auto& s : run_->snapshots) {
    double mean = 0.0;
    for (std::size_t p = 0; p < y0.size(); ++p) mean += s.positions[p] - y0[p];
    EXPECT_LE(std::abs(mean / n), 3.0 * std::sqrt(s.time / n) + 1e-15) << "t=" << s.time;
  }
}

TEST_F(BrownianRun, QuadraticVariationMatchesIntegratedCoefficient) {
  const auto& qv = run_->quadratic_variation;
  const auto& ic = run_->integrated_coefficient;
  double mean_qv = 0.0;
  for (std::size_t p = 0; p < qv.size(); ++p) {
    EXPECT_DOUBLE_EQ(ic[p], ic[0]);
    mean_qv += qv[p];
  }
  mean_qv /= static_cast<double>(qv.size());
  EXPECT_NEAR(ic[0], 1.0, 1e-9);
  // Sum of 1000 squared N(0, dt) increments: relative sd sqrt(2/1000) per particle.
  EXPECT_NEAR(mean_qv, ic[0], 5.0 * std::sqrt(2.0e-3 / static_cast<double>(qv.size())));
  for (std::size_t p = 0; p < qv.size(); p += 997) EXPECT_NEAR(qv[p], ic[p], 6.0 * std::sqrt(2.0e-3));
}

TEST_F(BrownianRun, FourthMomentsOfIncrementsAreGaussian) {
  const auto rep = increment_moment_report(run_->snapshots, default_lag_ladder(run_->snapshots.size()), 1.0, 3.5);
  ASSERT_EQ(rep.rows.size(), 2 * (run_->snapshots.size() - 1));
  for (const auto& r : rep.rows) {
    const double lag = r.t - r.s;
    EXPECT_NEAR(r.m4 / (3.0 * lag * lag), 1.0, 0.05) << "s=" << r.s << " t=" << r.t;
  }
  EXPECT_TRUE(rep.all_within_bound());
  EXPECT_NEAR(rep.fitted_constant, 3.0, 0.15);

  const auto same = increment_moment_report(run_->snapshots, {{4, 4}}, 1.0);
  EXPECT_EQ(same.rows[0].m4, 0.0);
  EXPECT_TRUE(same.rows[0].within_bound);
}

TEST_F(BrownianRun, KdeTracksTheHeatSolution) {
  const auto exact = GridDensity::sample(kGrid, [](double x) { return oracle::gaussian_density(x, 0.0, 1.25); });
  EXPECT_LE(l1_distance(*run_->final().kde, exact), 0.05);
  EXPECT_LE(wasserstein1(*run_->final().kde, exact), 0.03);
}

TEST(Decoupled, ZeroCoefficientFreezesParticles) {
  const auto chi = CoefficientField::constant(kGrid, 1.0, 0.0);
  auto cfg = base_config(500, 1e-2);
  const auto run = simulate_decoupled(chi, gaussian_u0(), cfg);
  EXPECT_EQ(run.final().positions, run.snapshots.front().positions);
  for (double q : run.quadratic_variation) EXPECT_EQ(q, 0.0);
  const auto rep = increment_moment_report(run.snapshots, default_lag_ladder(run.snapshots.size()), 0.0);
  for (const auto& r : rep.rows) EXPECT_EQ(r.m4, 0.0);
  EXPECT_TRUE(rep.all_within_bound());
}

TEST(Decoupled, SingleParticleIsReproducible) {
  const auto chi = CoefficientField::constant(kGrid, 1.0, 1.0);
  auto cfg = base_config(1, 1e-2);
  cfg.snapshot_every = 1;
  const auto a = simulate_decoupled(chi, gaussian_u0(), cfg);
  const auto b = simulate_decoupled(chi, gaussian_u0(), cfg);
  ASSERT_EQ(a.snapshots.size(), 101u);
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) EXPECT_EQ(a.snapshots[k].positions, b.snapshots[k].positions);
  cfg.master_seed = 43;
  EXPECT_NE(simulate_decoupled(chi, gaussian_u0(), cfg).final().positions, a.final().positions);
}

TEST(Decoupled, EnsembleIsBitReproducible) {
  const auto chi = CoefficientField::constant(kGrid, 1.0, 0.8);
  const auto cfg = base_config(2000, 5e-3);
  const auto a = simulate_decoupled(chi, gaussian_u0(), cfg);
  const auto b = simulate_decoupled(chi, gaussian_u0(), cfg);
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    EXPECT_EQ(a.snapshots[k].positions, b.snapshots[k].positions);
    EXPECT_EQ(a.snapshots[k].kde->values, b.snapshots[k].kde->values);
  }
}

TEST(Decoupled, EulerStepUsesTheParticleStream) {
  // Hand replay: initial draw consumes one uniform, then one normal per step.
  const auto u0 = gaussian_u0();
  const auto chi = CoefficientField::constant(kGrid, 1.0, 0.7);
  auto cfg = base_config(3, 0.25);
  cfg.snapshot_every = 1;
  const auto run = simulate_decoupled(chi, u0, cfg);
  const auto init = sample_initial(u0, 3, cfg.master_seed);
  for (std::size_t p = 0; p < 3; ++p) {
    RandomStream s(StreamId{cfg.master_seed, stream_tag::kParticles, p});
    s.uniform();
    double y = init.positions[p];
    for (int k = 1; k <= 4; ++k) {
      y += 0.7 * 0.5 * s.normal();
      EXPECT_DOUBLE_EQ(run.snapshots[k].positions[p], y);
    }
  }
}

TEST(Decoupled, OutOfDomainWarning) {
  const Grid1D small(1.0, 16);
  const auto u0 = GridDensity::sample(small, [](double) { return 0.5; });
  auto cfg = base_config(1000, 1e-2);
  cfg.kde_grid = small;
  const auto run = simulate_decoupled(CoefficientField::constant(small, 1.0, 1.0), u0, cfg);
  ASSERT_FALSE(run.warnings.empty());
  EXPECT_NE(run.warnings[0].find("OutOfDomainFraction"), std::string::npos);
  EXPECT_GT(run.max_outside_fraction, 0.01);
}

TEST(Coupled, ConstantPhiIsBitIdenticalToDecoupled) {
  auto cfg = base_config(3000, 1e-2);
  const auto coupled = simulate_coupled(PhiSpec::constant(1.0), gaussian_u0(), cfg);
  const auto decoupled = simulate_decoupled(CoefficientField::constant(kGrid, 1.0, 1.0), gaussian_u0(), cfg);
  for (std::size_t k = 0; k < coupled.snapshots.size(); ++k) {
    EXPECT_EQ(coupled.snapshots[k].positions, decoupled.snapshots[k].positions);
  }
  EXPECT_TRUE(coupled.warnings.empty());

  // Independent seeds: same law, two-sample KS at the 99% level.
  cfg.master_seed = 777;
  const auto other = simulate_coupled(PhiSpec::constant(1.0), gaussian_u0(), cfg);
  const double n = static_cast<double>(cfg.n_particles);
  EXPECT_LE(oracle::ks_two_sample(other.final().positions, decoupled.final().positions), 1.628 * std::sqrt(2.0 / n));
}

TEST(Coupled, SubThresholdHeavisideDiffusesAtRegularization) {
  const auto u0 = gaussian_u0();
  auto cfg = base_config(10000);
  cfg.epsilon_reg = 0.5;
  const auto phi = PhiSpec::heaviside(2.0 * norm_linf(u0), 0.0, 1.0);
  const auto run = simulate_coupled(phi, u0, cfg);
  for (const auto& s : run.snapshots) {
    EXPECT_NEAR(s.variance - run.snapshots.front().variance, 0.25 * s.time, 0.03) << "t=" << s.time;
    EXPECT_LT(norm_linf(*s.kde), phi.jump_points().front());
  }
  for (double c : run.integrated_coefficient) EXPECT_NEAR(c, 0.25, 1e-12);
  EXPECT_TRUE(run.warnings.empty());
}

TEST(Coupled, DegenerateWithoutRegularizationWarns) {
  auto cfg = base_config(200, 1e-2, 0.1);
  const auto run = simulate_coupled(PhiSpec::heaviside(0.5), gaussian_u0(), cfg);
  ASSERT_FALSE(run.warnings.empty());
  EXPECT_NE(run.warnings[0].find("DegenerateWithoutRegularization"), std::string::npos);
}

TEST(Coupled, TwoParticleStepByHand) {
  const auto u0 = gaussian_u0();
  auto cfg = base_config(2, 0.01, 0.01);
  cfg.bandwidth = {BandwidthRule::Kind::Fixed, 0.4};
  cfg.epsilon_reg = 0.1;
  cfg.snapshot_every = 1;
  const auto phi = PhiSpec::continuous([](double u) { return std::min(std::abs(u), 1.0); }, 1.0, "clip");
  const auto run = simulate_coupled(phi, u0, cfg);
  const auto y0 = run.snapshots[0].positions;
  ASSERT_EQ(y0, sample_initial(u0, 2, cfg.master_seed).positions);

  // u_hat at the grid nodes is the two-kernel average; the coefficient uses its linear interpolant.
  const auto u_hat = [&](double x) {
    const double s = (x - kGrid.node(0)) / kGrid.h();
    const int i = static_cast<int>(s);
    const auto at = [&](int j) {
      return 0.5 * (oracle::gaussian_density(kGrid.node(j), y0[0], 0.16) +
                    oracle::gaussian_density(kGrid.node(j), y0[1], 0.16));
    };
    return at(i) + (s - i) * (at(i + 1) - at(i));
  };
  for (std::size_t p = 0; p < 2; ++p) {
    RandomStream s(StreamId{cfg.master_seed, stream_tag::kParticles, p});
    s.uniform();
    const double coef = std::min(u_hat(y0[p]), 1.0) + 0.1;
    EXPECT_NEAR(run.final().positions[p], y0[p] + coef * 0.1 * s.normal(), 1e-14);
  }
}

TEST(PowerLawClock, AntiderivativeAndSegments) {
  const PowerLawClock c(0.25, 1.0);
  EXPECT_DOUBLE_EQ(c.phi(0.0), 0.0);
  EXPECT_DOUBLE_EQ(c.phi(16.0), 1.0);
  EXPECT_DOUBLE_EQ(c.phi(-0.0625), 0.5);
  // 1/Phi^2 = |x|^{-1/2} below the knee (x = 1): F = 2 sqrt(x); linear above.
  EXPECT_NEAR(c.antiderivative(0.25), 1.0, 1e-15);
  EXPECT_NEAR(c.antiderivative(-0.25), -1.0, 1e-15);
  EXPECT_NEAR(c.antiderivative(3.0), 2.0 + 2.0, 1e-15);
  for (double x : {-2.5, -0.3, 0.01, 0.7, 1.5}) {
    const double d = 1e-6;
    EXPECT_NEAR((c.antiderivative(x + d) - c.antiderivative(x - d)) / (2 * d), c.inverse_square(x),
                1e-5 * c.inverse_square(x));
  }
  // Segment crossing the singularity vs Simpson on each side (substitution x = v^2 removes it).
  const double b0 = -0.09, b1 = 0.16, dur = 0.5;
  const double left = oracle::simpson([](double) { return 2.0; }, 0.0, 0.3, 10);
  const double right = oracle::simpson([](double) { return 2.0; }, 0.0, 0.4, 10);
  EXPECT_NEAR(c.segment_integral(b0, b1, dur), dur * (left + right) / (b1 - b0), 1e-13);
  EXPECT_DOUBLE_EQ(c.segment_integral(0.25, 0.25, 0.1), 0.1 * 2.0);
  EXPECT_THROW(PowerLawClock(0.5, 1.0), Error);
  EXPECT_THROW(PowerLawClock::from_phi(PhiSpec::heaviside(1.0)), Error);
}

TEST(EngelbertSchmidt, PathClockIsBelowRealTime) {
  const PowerLawClock c(0.25, 1.0);
  const auto path = engelbert_schmidt_path(c, 1e-2, 1.0, StreamId{5, stream_tag::kCounterexample, 0});
  ASSERT_EQ(path.values.size(), 101u);
  for (std::size_t k = 1; k < path.clock.size(); ++k) {
    EXPECT_GE(path.clock[k], path.clock[k - 1]);
    EXPECT_LE(path.clock[k], path.times[k] + 1e-12);
  }
  EXPECT_EQ(path.resamples, 0);
}

TEST(EngelbertSchmidt, QuadraticVariationIdentity) {
  const PowerLawClock c(0.25, 1.0);
  for (std::uint64_t p = 0; p < 5; ++p) {
    const auto path = engelbert_schmidt_path(c, 1e-3, 1.0, StreamId{1, stream_tag::kCounterexample, p}, {1e-5, 16});
    const auto q = quadratic_variation_check(c, path);
    EXPECT_LE(q.clock_rel_error(), 0.1) << "path " << p << " A=" << q.clock << " int=" << q.integrated;
    EXPECT_LE(q.realized_rel_error(), 0.1) << "path " << p << " qv=" << q.realized << " int=" << q.integrated;
  }
}

TEST(EngelbertSchmidt, TwoDistinctSolutions) {
  auto cfg = base_config(2000, 1e-2);
  cfg.master_seed = 1;
  const auto phi = PhiSpec::power(0.25, 1.0);
  const auto pair = engelbert_schmidt_pair(phi, cfg);
  for (const auto& s : pair.trivial.snapshots) {
    EXPECT_EQ(s.variance, 0.0);
    EXPECT_EQ(s.mean, 0.0);
  }
  const auto ci = variance_confidence(pair.nontrivial.final().positions);
  EXPECT_GT(ci.lo, 0.0);
  EXPECT_GT(ci.variance, 0.01);
  // A martingale started at 0: mean within the CLT band.
  EXPECT_LE(std::abs(pair.nontrivial.final().mean), 3.0 * std::sqrt(ci.variance / 2000.0));
  const auto again = engelbert_schmidt_pair(phi, cfg);
  EXPECT_EQ(again.nontrivial.final().positions, pair.nontrivial.final().positions);
  EXPECT_THROW(engelbert_schmidt_pair(PhiSpec::regularized(phi, 0.1), cfg), Error);
}

TEST(VarianceConfidence, CoversKnownVariance) {
  RandomStream rng(StreamId{3, stream_tag::kTestData, 0});
  std::vector<double> xs(20000);
  for (double& x : xs) x = 2.0 * rng.normal();
  const auto ci = variance_confidence(xs);
  EXPECT_LT(ci.lo, 4.0);
  EXPECT_GT(ci.hi, 4.0);
  EXPECT_LT(ci.hi - ci.lo, 0.5);
  const std::vector<double> zeros(10, 0.0);
  const auto z = variance_confidence(zeros);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_EQ(z.hi, 0.0);
}
