#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "seqclt/circle_map.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/initial_density.hpp"
#include "seqclt/observable.hpp"
#include "seqclt/random.hpp"
#include "seqclt/schedule.hpp"

using namespace seqclt;

TEST(CircleMap, Evaluation) {
  EXPECT_NEAR(CircleMap(2, 0.0)(0.3), 0.6, 1e-15);
  EXPECT_NEAR(CircleMap(2, 0.05, 0.0)(0.0), 0.0, 1e-15);
  EXPECT_NEAR(CircleMap(3, 0.1, 0.0)(0.25), 0.85, 1e-15);
}

TEST(CircleMap, LiftIsEquivariant) {
  const CircleMap t(3, 0.07, 0.2);
  for (double x = -1.0; x < 2.0; x += 0.137) EXPECT_NEAR(t.lift(x + 1.0), t.lift(x) + 3.0, 1e-12);
}

TEST(CircleMap, Bounds) {
  const auto b0 = map_bounds(CircleMap(2, 0.0));
  EXPECT_DOUBLE_EQ(b0.lambda, 2.0);
  EXPECT_DOUBLE_EQ(b0.a_star, 0.0);
  const auto b1 = map_bounds(CircleMap(3, 0.1));
  EXPECT_NEAR(b1.lambda, 2.37168, 1e-5);
  EXPECT_NEAR(b1.a_star, 3.94784, 1e-5);
  EXPECT_THROW(CircleMap(2, 0.2), ConstraintError);
  EXPECT_THROW(CircleMap(1, 0.0), ConstraintError);
}

// The closed-form lambda and A* match the grid extremes of T' and |T''|.
TEST(CircleMap, BoundsMatchGridExtremes) {
  for (const auto& t : {CircleMap(2, 0.1, 0.3), CircleMap(3, -0.2, 0.7), CircleMap(4, 0.3, 0.0)}) {
    double dmin = 1e9, d2max = 0.0;
    for (int j = 0; j < 100000; ++j) {
      const double x = j / 100000.0;
      dmin = std::min(dmin, t.derivative(x));
      d2max = std::max(d2max, std::abs(t.second_derivative(x)));
    }
    EXPECT_NEAR(dmin, t.lambda(), 1e-6);
    EXPECT_NEAR(d2max, t.a_star(), 1e-4);
  }
}

TEST(Preimages, DoublingExamples) {
  const auto p = preimages(CircleMap(2, 0.0), 0.5);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 0.25, 1e-13);
  EXPECT_NEAR(p[1], 0.75, 1e-13);
  const auto q = preimages(CircleMap(2, 0.0), 0.0);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_NEAR(q[0], 0.0, 1e-13);
  EXPECT_NEAR(q[1], 0.5, 1e-13);
}

TEST(Preimages, ResidualsAndCount) {
  const CircleMap t(3, 0.1);
  const auto p = preimages(t, 0.37);
  ASSERT_EQ(p.size(), 3u);
  for (const double y : p) EXPECT_LT(circle_distance(t(y), 0.37), 1e-12);
  EXPECT_LT(p[0], p[1]);
  EXPECT_LT(p[1], p[2]);
}

TEST(Preimages, PropertySweep) {
  Stream rng(17, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(3));
    const double amax = (k - 1.0) / kTwoPi * 0.95;
    const CircleMap t(k, (2.0 * rng.uniform() - 1.0) * amax, rng.uniform());
    const double x = rng.uniform();
    const auto p = preimages(t, x);
    ASSERT_EQ(static_cast<int>(p.size()), k);
    for (const double y : p) EXPECT_LT(circle_distance(t(y), x), 1e-12);
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_GT(p[i] - p[i - 1], 1e-6);
  }
}

TEST(C1Distance, Examples) {
  const CircleMap a(2, 0.08, 0.1);
  EXPECT_EQ(c1_distance(a, a), 0.0);
  const double amp = 0.1;
  EXPECT_NEAR(c1_distance(CircleMap(2, amp), CircleMap(2, 0.0)), amp * (1.0 + kTwoPi), 1e-6);
}

TEST(InitialDensity, InverseCdf) {
  EXPECT_DOUBLE_EQ(InitialDensity(0.0).inverse_cdf(0.42), 0.42);
  EXPECT_DOUBLE_EQ(InitialDensity(0.5).inverse_cdf(0.0), 0.0);
  const InitialDensity rho(0.6);
  for (double u = 0.01; u < 1.0; u += 0.0731) EXPECT_NEAR(rho.cdf(rho.inverse_cdf(u)), u, 1e-12);
  EXPECT_THROW(InitialDensity(1.0), ConstraintError);
}

TEST(InitialDensity, SampleMomentsMatchDensity) {
  const InitialDensity rho(0.5);
  Stream rng(4, 1);
  constexpr int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::sin(kTwoPi * sample_initial(rho, rng));
  // E sin(2 pi x) = epsilon / 2.
  EXPECT_NEAR(s / n, 0.25, 5.0 * std::sqrt(0.5 / n));
}

TEST(Schedule, IterateOrbit) {
  const auto s = MapSchedule::constant(CircleMap(2, 0.0));
  const auto o0 = iterate_orbit(s, 0.1, 0);
  ASSERT_EQ(o0.size(), 1u);
  EXPECT_EQ(o0[0], 0.1);
  const auto o = iterate_orbit(s, 0.1, 2);
  ASSERT_EQ(o.size(), 3u);
  EXPECT_NEAR(o[1], 0.2, 1e-15);
  EXPECT_NEAR(o[2], 0.4, 1e-15);
}

TEST(Schedule, ExplicitListCyclesAndBounds) {
  const auto s = MapSchedule::explicit_list({CircleMap(2, 0.05), CircleMap(3, 0.1, 0.2)}, true);
  EXPECT_EQ(s.map(1).degree(), 2);
  EXPECT_EQ(s.map(2).degree(), 3);
  EXPECT_EQ(s.map(3).degree(), 2);
  EXPECT_NEAR(s.lambda_min(), 2.0 - kTwoPi * 0.05, 1e-14);
  const auto finite = MapSchedule::explicit_list({CircleMap(2, 0.0)}, false);
  EXPECT_EQ(finite.horizon(), 1);
  EXPECT_THROW(iterate_orbit(finite, 0.1, 2), ConstraintError);
}

TEST(Schedule, QuasistaticRowFollowsCurve) {
  const auto curve = std::make_shared<const QuasistaticCurve>(
      QuasistaticCurve::holder_cusp(2, 0.05, 0.1, 0.5, 0.8, 0.0, 0.2));
  const auto row = MapSchedule::quasistatic(curve, 10);
  EXPECT_EQ(row.horizon(), 10);
  for (int k = 1; k <= 10; ++k) {
    EXPECT_DOUBLE_EQ(row.map(k).amplitude(), curve->at(k / 10.0).amplitude());
    EXPECT_DOUBLE_EQ(row.map(k).phase(), curve->at(k / 10.0).phase());
  }
  EXPECT_DOUBLE_EQ(row.row_map(0).amplitude(), curve->at(0.0).amplitude());
}

TEST(Schedule, HolderConstantDominatesMeasuredRatio) {
  for (const double eta : {0.3, 0.5, 0.8, 1.0}) {
    const auto c = QuasistaticCurve::holder_cusp(2, 0.04, 0.1, 0.4, eta, 0.1, 0.3);
    EXPECT_LE(c.measured_holder_ratio(), c.holder_constant() * (1.0 + 1e-9)) << "eta " << eta;
  }
}

TEST(RandomDriver, ReproduciblePathsAndStationaryLaw) {
  const auto d = RandomDriver::default_markov();
  const auto p1 = d.sample_path(5, 20000);
  EXPECT_EQ(p1, d.sample_path(5, 20000));
  EXPECT_NE(p1, d.sample_path(6, 20000));
  std::vector<double> freq(d.states().size(), 0.0);
  for (const int s : p1) freq[static_cast<std::size_t>(s)] += 1.0 / p1.size();
  for (std::size_t s = 0; s < freq.size(); ++s) EXPECT_NEAR(freq[s], d.stationary()(static_cast<Eigen::Index>(s)), 0.03);
}

TEST(RandomDriver, RejectsReducibleChain) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(RandomDriver::markov({CircleMap(2, 0.0), CircleMap(3, 0.0)}, p), ConstraintError);
}

TEST(RandomDriver, IidFrequencies) {
  const auto d = RandomDriver::iid({CircleMap(2, 0.0), CircleMap(3, 0.0)}, {0.25, 0.75});
  const auto s = MapSchedule::random(d, 3, 40000);
  double threes = 0.0;
  for (int i = 1; i <= 40000; ++i) threes += s.map(i).degree() == 3;
  EXPECT_NEAR(threes / 40000, 0.75, 0.015);
  EXPECT_EQ(s.lambda_min(), 2.0);
}

TEST(Observable, ParseAndNorms) {
  const auto f = Observable::parse({"cos1", "sin2"});
  EXPECT_EQ(f.dim(), 2);
  EXPECT_DOUBLE_EQ(f.sup(), 1.0);
  EXPECT_NEAR(f.lip(), 2.0 * kTwoPi, 1e-14);
  EXPECT_EQ(f.bound_violation(), 0.0);
  EXPECT_TRUE(Observable::parse({"const:0"}).is_zero());
  EXPECT_THROW(Observable::parse({"tan1"}), ConfigError);
}
