#include <gtest/gtest.h>

#include <cmath>

#include "seqclt/bounds.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/random.hpp"

using namespace seqclt;

TEST(ChooseK, Examples) {
  const double theta = std::exp(-1.0);
  const auto k = choose_K(54, theta);
  EXPECT_EQ(k.K, 8);
  EXPECT_TRUE(k.valid);
  EXPECT_NEAR(min_valid_N(theta), 40.04, 0.01);
  EXPECT_FALSE(choose_K(20, theta).valid);
  EXPECT_THROW(choose_K(10, 1.0), ConstraintError);
}

TEST(ChooseK, ValidityImpliesKBelowN) {
  Stream rng(12, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const double theta = 0.01 + 0.98 * rng.uniform();
    const auto n = static_cast<std::int64_t>(std::exp(1.0 + 14.0 * rng.uniform()));
    const auto k = choose_K(n, theta);
    if (k.valid) {
      EXPECT_LT(k.K, n);
      if (n >= 3) EXPECT_LE(static_cast<double>(k.K + 1), k.k_plus_1_bound);
    }
  }
}

TEST(Geometric, Examples) {
  EXPECT_NEAR(geometric_tail(0.5, 10), 0.0009765625, 1e-16);
  EXPECT_DOUBLE_EQ(geometric_weighted_sqrt(0.5), 2.0);
  double prev = 1e9;
  for (int k = 0; k < 60; k += 5) {
    const double t = geometric_tail(0.7, k);
    EXPECT_LT(t, prev);
    prev = t;
  }
  // Oracle: sqrt of the explicit partial sum.
  double s = 0.0;
  for (int i = 0; i < 2000; ++i) s += (i + 1) * std::pow(0.8, i);
  EXPECT_NEAR(geometric_weighted_sqrt(0.8), std::sqrt(s), 1e-10);
}

TEST(SumLemma, Examples) {
  const auto r = sum_lemma_check({1.0, 0.0, 0.0});
  EXPECT_EQ(r.lhs, 1.0);
  EXPECT_EQ(r.rhs, 2.0);
  EXPECT_TRUE(r.holds);
  std::vector<double> g;
  for (int i = 0; i < 20; ++i) g.push_back(std::pow(0.5, i));
  const auto q = sum_lemma_check(g);
  EXPECT_NEAR(q.lhs, 4.0, 1e-4);
  EXPECT_NEAR(q.rhs, 8.0, 1e-3);
  EXPECT_TRUE(q.holds);
  EXPECT_THROW(sum_lemma_check({0.5}), ConstraintError);
  EXPECT_THROW(sum_lemma_check({1.0, 0.2, 0.3}), ConstraintError);
}

TEST(SumLemma, RandomAdmissibleSequences) {
  Stream rng(13, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> rho{1.0};
    const int len = 1 + static_cast<int>(rng.below(200));
    for (int i = 1; i < len; ++i) rho.push_back(rho.back() * rng.uniform());
    EXPECT_TRUE(sum_lemma_check(rho).holds);
  }
}

TEST(CStar, Examples) {
  EXPECT_DOUBLE_EQ(c_star(1, 1, 1, 1, 1, 1, 0.5), 24.0);
  EXPECT_DOUBLE_EQ(c_star(2, 1, 1, 1, 1, 1, 0.5), 8.0 * 24.0);
  EXPECT_DOUBLE_EQ(c_star(1, 1, 4, 1, 1, 1, 0.5), 48.0);
}

TEST(ThmMainBound, Example) {
  const auto b = thm_main_bound(24.0, 100, 10, 0.5, 0.0);
  EXPECT_NEAR(b.value, 26.4234375, 1e-10);
  double sum = 0.0;
  for (const auto& [label, v] : b.pieces) sum += v;
  EXPECT_DOUBLE_EQ(sum, b.value);
  // With rho~ = 0 and K = N - 1 the window term grows like sqrt N.
  EXPECT_GT(thm_main_bound(24.0, 10000, 9999, 1e-3, 0.0).value, 24.0 * 99.0);
}

TEST(CSharp, Examples) {
  const auto c = c_sharp(1.0, 1.0, 1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(c.c_sharp, 48.0);
  EXPECT_DOUBLE_EQ(c.c_sharp_prime, 2.0);
  const auto c2 = c_sharp(2.0, 1.0, 1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(c2.c_sharp, 24.0);
  EXPECT_DOUBLE_EQ(c2.c_sharp_prime, 2.0);
  const auto small = c_sharp(1e-3, 1.0, 1.0, 1.0, 0.5);
  EXPECT_NEAR(small.c_sharp, 48.0e6, 1e-3);
  EXPECT_NEAR(small.c_sharp_prime, 2.0e6, 1e-3);
}

TEST(RhoTilde, Examples) {
  EXPECT_NEAR(rho_tilde_univar(2, 0.25, 1.0, 1.0), 7.0 / 3.0, 1e-12);
  EXPECT_LT(rho_tilde_univar(400, 0.25, 1.0, 1.0), 1e-100);
  // The multivariate form with d = 1 and unit derivative norms is the univariate one.
  for (int k : {1, 3, 9}) EXPECT_NEAR(rho_tilde_multivar(k, 1, 0.4, 2.0, 1.5, 1.0, 1.0), rho_tilde_univar(k, 0.4, 2.0, 1.5), 1e-12);
}

TEST(RhoTilde, MultivariateDominatesForLargerDimension) {
  Stream rng(3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const double theta = 0.05 + 0.9 * rng.uniform();
    const auto k = static_cast<std::int64_t>(rng.below(50));
    const double b0 = 3.0 * rng.uniform();
    const double fl = 0.1 + 5.0 * rng.uniform();
    const int d = 1 + static_cast<int>(rng.below(4));
    EXPECT_GE(rho_tilde_multivar(k, d + 1, theta, b0, fl, 1.0, 1.0), rho_tilde_multivar(k, d, theta, b0, fl, 1.0, 1.0));
  }
}

TEST(CircleConstants, Examples) {
  EXPECT_NEAR(circle_C_tilde(1, 1, 1, 1, 1, 0.25), 232.0, 1e-9);
  const auto b = circle_variance_free_bound(232.0, 1000000, 0.25);
  EXPECT_NEAR(b.value, 232.0 * 0.1 * std::log(1e6), 1e-9);
  EXPECT_NEAR(b.value, 320.52, 0.01);
  EXPECT_TRUE(b.flags.at("valid_N"));
  EXPECT_FALSE(circle_wasserstein_bound(232.0, 1.0, 0.0, 10, 0.25).flags.at("valid_N"));
}

TEST(CircleBounds, Shapes) {
  const auto w1 = circle_wasserstein_bound(10.0, 0.5, 0.0, 1000, 0.5);
  EXPECT_NEAR(w1.value, 10.0 * 4.0 * std::log(1000.0) / std::sqrt(1000.0), 1e-12);
  const auto w2 = circle_wasserstein_bound(10.0, 2.0, 0.1, 1000, 0.5);
  EXPECT_NEAR(w2.value, 10.0 * std::pow(1000.0, -0.3) * std::log(1000.0), 1e-12);
  const auto sn = circle_self_normalized_bound(10.0, 4.0, 1.0, 1000, 0.5);
  EXPECT_NEAR(sn.value, 10.0 * 0.5 * std::pow(1000.0, -0.5) * std::log(1000.0), 1e-12);
  EXPECT_THROW(circle_wasserstein_bound(10.0, 0.0, 0.0, 100, 0.5), ConstraintError);
  EXPECT_NEAR(circle_multivar_bound(3.0, 100, 0.5).value, 3.0 * std::log(100.0) / 10.0, 1e-12);
}

TEST(CircleConstants, MultivariateMatchesUnivariateShape) {
  // With d = 1 and unit derivative bounds the multivariate constant is
  // 30 M (1 + ||f||)/(1-theta)^2 + 2 fl^2/(theta^-1/2 - theta^1/2) + 4 B0 fl + 2 fl theta^-1/2,
  // exactly half of C~.
  for (const double theta : {0.1, 0.5, 0.9})
    EXPECT_NEAR(2.0 * circle_C_multivar(1, 0.7, 0.3, 1.0, 2.0, 1.5, theta, 1.0, 1.0, 1.0),
                circle_C_tilde(0.7, 0.3, 1.0, 2.0, 1.5, theta), 1e-9);
}

TEST(SplittingBound, Examples) {
  EXPECT_DOUBLE_EQ(splitting_bound(0, 0.0, 1.0, 1.0, 2.0, 1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(splitting_bound(4, 1.0, 1.0, 1.0, 2.0, 1.0, 0.5), 0.75);
  EXPECT_LT(splitting_bound(200, 1.0, 1.0, 1.0, 2.0, 1.0, 0.5), 1e-29);
}

TEST(LStar, Formula) { EXPECT_NEAR(l_star(2.0, 1.0), 8.0, 1e-14); }
