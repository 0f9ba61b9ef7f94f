#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "seqclt/errors.hpp"

namespace seqclt {

namespace detail {

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double std_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// G(x) = int_{-inf}^x Phi(u / sigma) du = x Phi(x / sigma) + sigma phi(x / sigma).
inline double gauss_cdf_antiderivative(double x, double sigma) {
  const double z = x / sigma;
  return x * std_normal_cdf(z) + sigma * std_normal_pdf(z);
}

// int_a^b |c - Phi(u / sigma)| du for a <= b, a constant c in [0, 1].
inline double cdf_gap_segment(double a, double b, double c, double sigma) {
  if (b <= a) return 0.0;
  // Integrals of Phi on [a, b], or of 1 - Phi when the segment lies on the
  // right, where G(b) - G(a) would cancel.
  auto int_phi = [sigma](double lo, double hi) {
    return gauss_cdf_antiderivative(hi, sigma) - gauss_cdf_antiderivative(lo, sigma);
  };
  auto int_upper = [sigma](double lo, double hi) {
    return gauss_cdf_antiderivative(-lo, sigma) - gauss_cdf_antiderivative(-hi, sigma);
  };
  auto signed_part = [&](double lo, double hi) {  // int (c - Phi)
    if (lo >= 0.0) return int_upper(lo, hi) - (1.0 - c) * (hi - lo);
    return c * (hi - lo) - int_phi(lo, hi);
  };
  const double pa = std_normal_cdf(a / sigma);
  const double pb = std_normal_cdf(b / sigma);
  if (c <= pa) return -signed_part(a, b);
  if (c >= pb) return signed_part(a, b);
  const boost::math::normal_distribution<double> nd(0.0, sigma);
  const double q = std::clamp(boost::math::quantile(nd, c), a, b);
  return signed_part(a, q) - signed_part(q, b);
}

}  // namespace detail

/// W1(empirical law of samples, N(0, sigma^2)) = int |F_m - Phi(. / sigma)|,
/// integrated exactly segment by segment. sigma = 0 means the point mass at 0.
inline double w1_empirical_vs_normal(std::vector<double> samples, double sigma) {
  if (samples.empty()) throw ConstraintError("w1_empirical_vs_normal: no samples");
  if (!(sigma >= 0.0)) throw ConstraintError("w1_empirical_vs_normal: sigma must be >= 0");
  const auto m = static_cast<double>(samples.size());
  if (sigma == 0.0) {
    double s = 0.0;
    for (const double x : samples) s += std::abs(x);
    return s / m;
  }
  std::sort(samples.begin(), samples.end());
  double total = detail::gauss_cdf_antiderivative(samples.front(), sigma);
  for (std::size_t k = 1; k < samples.size(); ++k) {
    total += detail::cdf_gap_segment(samples[k - 1], samples[k], static_cast<double>(k) / m, sigma);
  }
  total += detail::gauss_cdf_antiderivative(-samples.back(), sigma);
  return total;
}

/// W1 between two equal-size empirical laws via the sorted coupling.
inline double w1_empirical_pair(std::vector<double> s1, std::vector<double> s2) {
  if (s1.size() != s2.size()) throw ConstraintError("w1_empirical_pair: length mismatch");
  if (s1.empty()) throw ConstraintError("w1_empirical_pair: empty samples");
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  double s = 0.0;
  for (std::size_t i = 0; i < s1.size(); ++i) s += std::abs(s1[i] - s2[i]);
  return s / static_cast<double>(s1.size());
}

/// W1(aZ, bZ) = |a - b| E|Z| = sqrt(2/pi) |a - b|.
inline double normal_w1_bound(double a, double b) {
  if (a < 0.0 || b < 0.0) throw ConstraintError("normal_w1_bound: a, b must be >= 0");
  return std::numbers::sqrt2 * std::abs(a - b) / std::sqrt(std::numbers::pi);
}

/// h(w) = cos(v . w + c).
struct TrigTestFunction {
  Eigen::VectorXd v;
  double c = 0.0;

  double operator()(const Eigen::VectorXd& w) const { return std::cos(v.dot(w) + c); }

  /// ||D^k h||_inf under the max-entry convention: max_alpha |v_alpha|^k.
  double derivative_bound(int k) const { return v.size() == 0 ? 0.0 : std::pow(v.cwiseAbs().maxCoeff(), k); }

  double gaussian_expectation(const Eigen::MatrixXd& sigma) const {
    return std::cos(c) * std::exp(-0.5 * v.dot(sigma * v));
  }
};

struct SmoothTestResult {
  double distance;
  double stderr_;
};

namespace detail {

inline void check_symmetric(const Eigen::MatrixXd& s, const char* who) {
  if (s.rows() != s.cols()) throw ConstraintError(std::string(who) + ": matrix must be square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ConstraintError(std::string(who) + ": matrix is not symmetric");
}

}  // namespace detail

/// |mean of h over the samples (rows) - Phi_Sigma(h)| and the Monte Carlo
/// standard error of the sample mean.
inline SmoothTestResult smooth_test_distance(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& sigma,
                                             const TrigTestFunction& h) {
  detail::check_symmetric(sigma, "smooth_test_distance");
  if (samples.cols() != sigma.rows() || h.v.size() != sigma.rows())
    throw ConstraintError("smooth_test_distance: dimension mismatch");
  const auto m = samples.rows();
  if (m == 0) throw ConstraintError("smooth_test_distance: no samples");
  double sum = 0.0;
  double sumsq = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    const double v = h(samples.row(r).transpose());
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / m;
  const double var = m > 1 ? std::max(0.0, (sumsq - m * mean * mean) / (m - 1)) : 0.0;
  return {std::abs(mean - h.gaussian_expectation(sigma)), std::sqrt(var / m)};
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-8, 0) are clipped to 0; below that the input is rejected.
inline Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& s) {
  detail::check_symmetric(s, "matrix_sqrt");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericalError("matrix_sqrt: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -1e-8) throw ConstraintError("matrix_sqrt: matrix is not PSD");
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

inline double spectral_norm_symmetric(const Eigen::MatrixXd& s) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// ||S1 - S2|| / (sqrt(l1(S1)) + sqrt(l1(S2))), l1 the smallest eigenvalue;
/// an upper bound for ||S1^{1/2} - S2^{1/2}|| in the spectral norm.
inline double sqrt_diff_bound(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2) {
  detail::check_symmetric(s1, "sqrt_diff_bound");
  detail::check_symmetric(s2, "sqrt_diff_bound");
  if (s1.rows() != s2.rows()) throw ConstraintError("sqrt_diff_bound: dimension mismatch");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1, Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e2(s2, Eigen::EigenvaluesOnly);
  const double l1 = e1.eigenvalues().minCoeff();
  const double l2 = e2.eigenvalues().minCoeff();
  if (l1 < -1e-8 || l2 < -1e-8) throw ConstraintError("sqrt_diff_bound: matrix is not PSD");
  const double denom = std::sqrt(std::max(l1, 0.0)) + std::sqrt(std::max(l2, 0.0));
  if (!(denom > 0.0)) throw ConstraintError("sqrt_diff_bound: both matrices are singular");
  return spectral_norm_symmetric(s1 - s2) / denom;
}

}  // namespace seqclt
