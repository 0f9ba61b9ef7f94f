#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "seqclt/distances.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/random.hpp"

using namespace seqclt;

namespace {

const double kEZ = std::sqrt(2.0 / std::numbers::pi);

// Brute-force W1: trapezoid rule for the integral of |F_m - Phi| on a fine grid.
double w1_quadrature_oracle(std::vector<double> s, double sigma) {
  std::sort(s.begin(), s.end());
  const double lo = std::min(s.front(), -12.0 * sigma) - 1.0;
  const double hi = std::max(s.back(), 12.0 * sigma) + 1.0;
  constexpr int n = 2000000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  std::size_t below = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    while (below < s.size() && s[below] <= x) ++below;
    const double fm = static_cast<double>(below) / s.size();
    const double phi = sigma > 0.0 ? 0.5 * std::erfc(-x / (sigma * std::numbers::sqrt2)) : (x >= 0.0 ? 1.0 : 0.0);
    acc += (i == 0 || i == n ? 0.5 : 1.0) * std::abs(fm - phi);
  }
  return acc * h;
}

}  // namespace

TEST(W1Normal, Examples) {
  EXPECT_NEAR(w1_empirical_vs_normal(std::vector<double>(100, 0.0), 1.0), 0.797885, 1e-6);
  EXPECT_EQ(w1_empirical_vs_normal(std::vector<double>(10, 0.0), 0.0), 0.0);
}

TEST(W1Normal, MatchesQuadratureOracle) {
  Stream rng(3, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> s(25 + 10 * trial);
    const double sigma = 0.3 + 0.4 * trial;
    for (auto& x : s) x = 1.5 * rng.normal() + 0.2 * trial;
    EXPECT_NEAR(w1_empirical_vs_normal(s, sigma), w1_quadrature_oracle(s, sigma), 1e-5);
  }
}

TEST(W1Normal, QuantileSamplesConverge) {
  const boost::math::normal_distribution<> z;
  double prev = 1e9;
  for (const int m : {10, 100, 1000, 10000}) {
    std::vector<double> q(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) q[static_cast<std::size_t>(i)] = boost::math::quantile(z, (i + 0.5) / m);
    const double d = w1_empirical_vs_normal(q, 1.0);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(W1Pair, Examples) {
  const std::vector<double> s{0.3, -1.0, 2.0};
  EXPECT_EQ(w1_empirical_pair(s, s), 0.0);
  EXPECT_DOUBLE_EQ(w1_empirical_pair({0.0, 0.0}, {1.0, 1.0}), 1.0);
  EXPECT_THROW(w1_empirical_pair({0.0}, {1.0, 2.0}), ConstraintError);
}

TEST(W1Pair, BoundedBySumOfStandardDeviations) {
  Stream rng(7, 1);
  constexpr int m = 4000;
  for (int trial = 0; trial < 100; ++trial) {
    const double sx = 0.1 + 2.0 * rng.uniform();
    const double sy = 0.1 + 2.0 * rng.uniform();
    std::vector<double> x(m), y(m);
    for (auto& v : x) v = sx * rng.normal();
    for (auto& v : y) v = sy * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    EXPECT_LE(w1_empirical_pair(x, y), sx + sy + 6.0 / std::sqrt(m));
  }
}

TEST(NormalW1Bound, Examples) {
  EXPECT_EQ(normal_w1_bound(1.0, 1.0), 0.0);
  EXPECT_NEAR(normal_w1_bound(1.0, 0.0), 0.797885, 1e-6);
  EXPECT_NEAR(normal_w1_bound(0.5, 2.0), 1.5 * kEZ, 1e-15);
  EXPECT_THROW(normal_w1_bound(-1.0, 0.0), ConstraintError);
}

TEST(SmoothTest, Examples) {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 2);
  TrigTestFunction h{Eigen::Vector2d(1.0, 0.0), 0.0};
  EXPECT_NEAR(smooth_test_distance(zero, Eigen::Matrix2d::Identity(), h).distance, 1.0 - std::exp(-0.5), 1e-12);
  Stream rng(1, 1);
  Eigen::MatrixXd s(50, 2);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  TrigTestFunction flat{Eigen::Vector2d::Zero(), 0.4};
  EXPECT_NEAR(smooth_test_distance(s, Eigen::Matrix2d::Identity(), flat).distance, 0.0, 1e-15);
}

TEST(SmoothTest, GaussianSamplesWithinError) {
  Eigen::Matrix2d sigma;
  sigma << 1.0, 0.3, 0.3, 0.5;
  const Eigen::MatrixXd root = matrix_sqrt(sigma);
  Stream rng(2, 2);
  constexpr int m = 50000;
  Eigen::MatrixXd s(m, 2);
  for (int i = 0; i < m; ++i) s.row(i) = (root * Eigen::Vector2d(rng.normal(), rng.normal())).transpose();
  const TrigTestFunction h{Eigen::Vector2d(0.7, -1.1), 0.2};
  const auto r = smooth_test_distance(s, sigma, h);
  EXPECT_LT(r.distance, 4.0 * r.stderr_);
}

TEST(MatrixSqrt, Examples) {
  EXPECT_LT((matrix_sqrt(Eigen::Matrix3d::Identity()) - Eigen::Matrix3d::Identity()).norm(), 1e-14);
  const Eigen::Matrix2d d = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  const Eigen::Matrix2d want = Eigen::Vector2d(2.0, 3.0).asDiagonal();
  EXPECT_LT((matrix_sqrt(d) - want).norm(), 1e-14);
  Eigen::Matrix2d neg;
  neg << 1.0, 0.0, 0.0, -1.0;
  EXPECT_THROW(matrix_sqrt(neg), ConstraintError);
}

TEST(SqrtDiffBound, DominatesActualDifference) {
  Stream rng(4, 4);
  EXPECT_EQ(sqrt_diff_bound(Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity()), 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix3d a, b;
    for (int i = 0; i < 9; ++i) {
      a.data()[i] = rng.normal();
      b.data()[i] = rng.normal();
    }
    const Eigen::Matrix3d s1 = a * a.transpose() + 0.1 * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d s2 = b * b.transpose() + 0.1 * Eigen::Matrix3d::Identity();
    const double actual = spectral_norm_symmetric(matrix_sqrt(s1) - matrix_sqrt(s2));
    EXPECT_LE(actual, sqrt_diff_bound(s1, s2) * (1.0 + 1e-10));
  }
}
