#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"
#include "seqclt/random.hpp"
#include "seqclt/schedule.hpp"
#include "seqclt/transfer.hpp"

using namespace seqclt;

namespace {

constexpr int kM = 4096;

CircleMap random_map(Stream& rng) {
  const int k = 2 + static_cast<int>(rng.below(3));
  const double amax = 0.9 * (k - 1.0) / kTwoPi;
  return CircleMap(k, (2.0 * rng.uniform() - 1.0) * amax, rng.uniform());
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST(Transfer, DoublingPreservesLebesgue) {
  const auto out = transfer_apply(CircleMap(2, 0.0), GridDensity::uniform(kM));
  for (int j = 0; j < kM; ++j) ASSERT_NEAR(out[j], 1.0, 1e-14);
}

TEST(Transfer, DoublingCancelsFirstMode) {
  const auto g = GridDensity::from_function([](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x); }, kM);
  const auto out = transfer_apply(CircleMap(2, 0.0), g);
  for (int j = 0; j < kM; ++j) ASSERT_NEAR(out[j], 1.0, 1e-12);
}

// Oracle: (L g)(x) = sum over preimages y of g(y) / T'(y), evaluated exactly.
TEST(Transfer, MatchesPreimageSumOracle) {
  Stream rng(8, 0);
  const auto g_fn = [](double x) { return 1.0 + 0.4 * std::cos(kTwoPi * x) + 0.2 * std::sin(3.0 * kTwoPi * x); };
  for (int trial = 0; trial < 5; ++trial) {
    const CircleMap t = random_map(rng);
    const auto lg = transfer_table(t, kM)->apply(sample_on_grid(g_fn, kM));
    for (int j = 0; j < kM; j += 97) {
      const double x = static_cast<double>(j) / kM;
      double want = 0.0;
      for (const double y : preimages(t, x)) want += g_fn(y) / t.derivative(y);
      EXPECT_NEAR(lg[static_cast<std::size_t>(j)], want, 2e-6) << "trial " << trial << " x " << x;
    }
  }
}

TEST(Transfer, DualityPropertySweep) {
  Stream rng(1, 0);
  const auto probes = probe_catalog(5);
  const std::vector<std::function<double(double)>> fs{
      [](double x) { return std::cos(kTwoPi * x); },
      [](double x) { return std::sin(3.0 * kTwoPi * x); },
      [](double x) { return std::cos(kTwoPi * x) * std::sin(kTwoPi * x) + 0.3; },
  };
  for (int trial = 0; trial < 20; ++trial) {
    const CircleMap t = random_map(rng);
    for (const auto& p : probes) {
      const auto g = GridDensity::from_function(p.first, kM);
      const auto lg = transfer_apply_signed(t, g.values());
      for (const auto& f : fs) {
        const double lhs = integrate(sample_on_grid(f, kM), lg);
        double rhs = 0.0;
        for (int j = 0; j < kM; ++j) rhs += g[j] * f(t(g.x(j)));
        rhs /= kM;
        EXPECT_LT(std::abs(lhs - rhs), 1e-4);
      }
    }
  }
}

TEST(Transfer, MassPositivityAndLogLipschitzContraction) {
  Stream rng(2, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const CircleMap t = random_map(rng);
    const std::vector<double> g = sample_on_grid([](double x) { return 1.0 + 0.8 * std::sin(kTwoPi * x); }, kM);
    const auto lg = transfer_apply_signed(t, g);
    EXPECT_NEAR(grid_mean(lg), grid_mean(g), 1e-6);
    for (const double v : lg) ASSERT_GT(v, 0.0);
  }
}

TEST(Transfer, SignedApplicationIsLinear) {
  const CircleMap t(3, 0.1, 0.4);
  const auto a = sample_on_grid([](double x) { return std::cos(kTwoPi * x); }, kM);
  const auto b = sample_on_grid([](double x) { return std::sin(5.0 * kTwoPi * x); }, kM);
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = 2.0 * a[i] - 3.0 * b[i];
  const auto la = transfer_apply_signed(t, a);
  const auto lb = transfer_apply_signed(t, b);
  const auto lc = transfer_apply_signed(t, c);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(lc[i], 2.0 * la[i] - 3.0 * lb[i], 1e-12);
}

TEST(Transfer, CacheReturnsSharedTable) {
  const CircleMap t(2, 0.031, 0.77);
  EXPECT_EQ(transfer_table(t, 1024).get(), transfer_table(t, 1024).get());
  EXPECT_NE(transfer_table(t, 1024).get(), transfer_table(t, 2048).get());
}

TEST(Pushforward, ZeroStepsAndDoublingOneStep) {
  const auto s = MapSchedule::constant(CircleMap(2, 0.0));
  const auto rho0 = GridDensity::from_function([](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x); }, kM);
  EXPECT_EQ(pushforward_density(s, rho0, 0).values(), rho0.values());
  const auto one = pushforward_density(s, rho0, 1);
  EXPECT_LT(max_abs_diff(one.values(), GridDensity::uniform(kM).values()), 1e-12);
}

TEST(InvariantDensity, DoublingIsLebesgue) {
  const auto r = invariant_density_detailed(CircleMap(2, 0.0), 1e-12, kM);
  EXPECT_LT(max_abs_diff(r.density.values(), GridDensity::uniform(kM).values()), 1e-12);
}

TEST(InvariantDensity, IsFixedPointWithUnitMass) {
  const CircleMap t(2, 0.1, 0.2);
  const auto rho = invariant_density(t, 1e-13, kM);
  EXPECT_NEAR(rho.mass(), 1.0, 1e-12);
  EXPECT_LT(l1_distance(transfer_apply(t, rho), rho), 1e-12);
  // Grid refinement: M and 2M agree at common nodes up to interpolation error.
  const auto fine = invariant_density(t, 1e-13, 2 * kM);
  for (int j = 0; j < kM; j += 64) EXPECT_NEAR(rho[j], fine[2 * j], 1e-6);
}

TEST(GridDensity, L1AndIntegrals) {
  const auto one = GridDensity::uniform(kM);
  const auto g = GridDensity::from_function([](double x) { return 1.0 + 0.5 * std::sin(kTwoPi * x); }, kM);
  EXPECT_EQ(l1_distance(g, g), 0.0);
  // |sin| has kinks, so the grid rule is only second order here.
  EXPECT_NEAR(l1_distance(one, g), 1.0 / std::numbers::pi, 1e-6);
  EXPECT_NEAR(integrate([](double) { return 1.0; }, g), 1.0, 1e-14);
  EXPECT_NEAR(integrate([](double x) { return std::cos(kTwoPi * x); }, one), 0.0, 1e-14);
  EXPECT_NEAR(integrate([](double x) { return std::pow(std::cos(kTwoPi * x), 2); }, one), 0.5, 1e-14);
  EXPECT_EQ(lipschitz_log(one), 0.0);
  EXPECT_THROW(GridDensity::uniform(1000), ConstraintError);
}

TEST(EstimateTheta, SingleModeProbesCollapseUnderDoubling) {
  const auto s = MapSchedule::constant(CircleMap(2, 0.0));
  const std::vector<ProbePair> probes{
      {[](double x) { return 1.0 + 0.5 * std::cos(kTwoPi * x); }, [](double) { return 1.0; }},
      {[](double x) { return 1.0 + 0.3 * std::sin(kTwoPi * x); }, [](double) { return 1.0; }},
  };
  EXPECT_THROW(estimate_theta(s, probes), NumericalError);
}

TEST(EstimateTheta, ContractionEnvelopeOnUsablePrefix) {
  const auto s = MapSchedule::explicit_list({CircleMap(2, 0.1, 0.0), CircleMap(3, 0.15, 0.4)}, true);
  ThetaOptions opt;
  opt.start_times = {0, 1};
  const auto est = estimate_theta(s, 5, opt);
  ASSERT_GT(est.theta, 0.0);
  ASSERT_LT(est.theta, 1.0);
  for (const auto& p : est.probes) {
    for (int n = 0; n < p.usable; ++n)
      EXPECT_LE(p.distances[static_cast<std::size_t>(n)],
                est.d0_envelope * std::pow(est.theta, n) * (1.0 + 1e-12));
    for (int n = 1; n < p.usable; ++n)
      EXPECT_LE(p.distances[static_cast<std::size_t>(n)], p.distances[static_cast<std::size_t>(n - 1)] * (1.0 + 1e-9));
  }
}
