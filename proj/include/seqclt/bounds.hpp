#pragma once

// Closed-form rate bounds with geometric correlation decay rho(i) = theta^i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seqclt/constants.hpp"
#include "seqclt/errors.hpp"

namespace seqclt {

struct BoundReport {
  std::string name;
  double value = 0.0;
  std::vector<std::pair<std::string, double>> pieces;  ///< value = sum of pieces
  std::int64_t N = 0;
  std::int64_t K = -1;  ///< -1 when the bound has no K
  std::map<std::string, bool> flags;

  void add(std::string label, double v) {
    pieces.emplace_back(std::move(label), v);
    value += v;
  }
};

namespace detail {

inline void check_theta(double theta, const char* who) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConstraintError(std::string(who) + ": theta must be in (0, 1)");
}

inline double max_c2_c4(double c2, double c4) { return std::max(c2, std::sqrt(c4)); }

}  // namespace detail

struct KChoice {
  std::int64_t K;
  bool valid;              ///< N >= 16 / (1 - theta)^2, which guarantees K < N
  double k_plus_1_bound;   ///< 4 log N / (1 - theta), an upper bound for K + 1 when N >= 3
};

/// min N for which the circle-map bounds apply: 16 / (1 - theta)^2.
inline double min_valid_N(double theta) {
  detail::check_theta(theta, "min_valid_N");
  return 16.0 / ((1.0 - theta) * (1.0 - theta));
}

/// K = ceil(2 log N / -log theta).
inline KChoice choose_K(std::int64_t n, double theta) {
  if (n < 1) throw ConstraintError("choose_K: N must be >= 1");
  detail::check_theta(theta, "choose_K");
  const double logn = std::log(static_cast<double>(n));
  const auto k = static_cast<std::int64_t>(std::ceil(2.0 * logn / -std::log(theta)));
  return {k, static_cast<double>(n) >= min_valid_N(theta), 4.0 * logn / (1.0 - theta)};
}

/// sum_{i > K} theta^i = theta^{K+1} / (1 - theta).
inline double geometric_tail(double theta, std::int64_t k) {
  detail::check_theta(theta, "geometric_tail");
  if (k < 0) throw ConstraintError("geometric_tail: K must be >= 0");
  return std::pow(theta, static_cast<double>(k + 1)) / (1.0 - theta);
}

/// sqrt(sum_i (i + 1) theta^i) = 1 / (1 - theta).
inline double geometric_weighted_sqrt(double theta) {
  detail::check_theta(theta, "geometric_weighted_sqrt");
  return 1.0 / (1.0 - theta);
}

struct SumLemmaResult {
  double lhs;  ///< (sum rho)^2
  double rhs;  ///< 2 sum (i + 1) rho(i)
  bool holds;
};

/// (sum rho)^2 <= 2 sum (i + 1) rho(i) for nonincreasing rho in [0, 1], rho(0) = 1.
inline SumLemmaResult sum_lemma_check(const std::vector<double>& rho) {
  if (rho.empty() || rho.front() != 1.0) throw ConstraintError("sum_lemma_check: rho(0) must be 1");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] < 0.0 || rho[i] > 1.0) throw ConstraintError("sum_lemma_check: rho must lie in [0, 1]");
    if (i > 0 && rho[i] > rho[i - 1]) throw ConstraintError("sum_lemma_check: rho must be nonincreasing");
  }
  double s = 0.0;
  double w = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    s += rho[i];
    w += static_cast<double>(i + 1) * rho[i];
  }
  return {s * s, 2.0 * w, s * s <= 2.0 * w};
}

/// C* = 6 d^3 max{C2, sqrt C4} (||f|| ||D^3 h|| + ||D^2 h||) / (1 - theta).
inline double c_star(int d, double c2, double c4, double sup_f, double d2h, double d3h, double theta) {
  if (d < 1) throw ConstraintError("c_star: d must be >= 1");
  return 6.0 * d * d * d * detail::max_c2_c4(c2, c4) * (sup_f * d3h + d2h) * geometric_weighted_sqrt(theta);
}

/// C* ((K + 1)/sqrt N + sum_{i>K} rho(i)) + sqrt N rho~(K).
inline BoundReport thm_main_bound(double cstar, std::int64_t n, std::int64_t k, double theta, double rho_tilde_k) {
  if (k < 0 || k >= n) throw ConstraintError("thm_main_bound: need 0 <= K < N");
  BoundReport r;
  r.name = "smooth_multivariate";
  r.N = n;
  r.K = k;
  const double sn = std::sqrt(static_cast<double>(n));
  r.add("window", cstar * static_cast<double>(k + 1) / sn);
  r.add("tail", cstar * geometric_tail(theta, k));
  r.add("rho_tilde", sn * rho_tilde_k);
  return r;
}

struct CSharp {
  double c_sharp;
  double c_sharp_prime;
};

/// C# = 12 max{s^-1, s^-2} max{C2, sqrt C4} (1 + ||f||) / (1 - theta), C#' = 2 max{1, s^-2}.
inline CSharp c_sharp(double sigma_n, double c2, double c4, double sup_f, double theta) {
  if (!(sigma_n > 0.0)) throw ConstraintError("c_sharp: sigma_N must be > 0");
  const double inv = 1.0 / sigma_n;
  const double inv2 = inv * inv;
  return {12.0 * std::max(inv, inv2) * detail::max_c2_c4(c2, c4) * (1.0 + sup_f) * geometric_weighted_sqrt(theta),
          2.0 * std::max(1.0, inv2)};
}

/// C# ((K + 1)/sqrt N + sum_{i>K} rho(i)) + C#' sqrt N rho~(K).
inline BoundReport thm_wasserstein_bound(const CSharp& c, std::int64_t n, std::int64_t k, double theta,
                                         double rho_tilde_k) {
  if (k < 0 || k >= n) throw ConstraintError("thm_wasserstein_bound: need 0 <= K < N");
  BoundReport r;
  r.name = "wasserstein_univariate";
  r.N = n;
  r.K = k;
  const double sn = std::sqrt(static_cast<double>(n));
  r.add("window", c.c_sharp * static_cast<double>(k + 1) / sn);
  r.add("tail", c.c_sharp * geometric_tail(theta, k));
  r.add("rho_tilde", c.c_sharp_prime * sn * rho_tilde_k);
  return r;
}

inline double rho_tilde_univar(std::int64_t k, double theta, double b0, double f_lip_norm) {
  detail::check_theta(theta, "rho_tilde_univar");
  if (k < 0) throw ConstraintError("rho_tilde_univar: K must be >= 0");
  const double kd = static_cast<double>(k);
  const double fl = f_lip_norm;
  return 2.0 * fl * fl * std::pow(theta, (kd - 1.0) / 2.0) / (1.0 / theta - 1.0) +
         4.0 * b0 * fl * std::pow(theta, kd / 2.0) + 2.0 * fl * std::pow(theta, (kd - 1.0) / 2.0);
}

inline double rho_tilde_multivar(std::int64_t k, int d, double theta, double b0, double f_lip_norm, double d1h,
                                 double d2h) {
  detail::check_theta(theta, "rho_tilde_multivar");
  if (k < 0) throw ConstraintError("rho_tilde_multivar: K must be >= 0");
  if (d < 1) throw ConstraintError("rho_tilde_multivar: d must be >= 1");
  const double kd = static_cast<double>(k);
  const double fl = f_lip_norm;
  return 2.0 * d * d * d2h * fl * fl * std::pow(theta, (kd - 1.0) / 2.0) / (1.0 / theta - 1.0) +
         4.0 * d * b0 * fl * d1h * std::pow(theta, kd / 2.0) + 2.0 * d * d1h * fl * std::pow(theta, (kd - 1.0) / 2.0);
}

/// Constant C of the multivariate circle-map bound C N^{-1/2} log N.
inline double circle_C_multivar(int d, double c2, double c4, double sup_f, double f_lip_norm, double b0, double theta,
                                double d1h, double d2h, double d3h) {
  detail::check_theta(theta, "circle_C_multivar");
  const double om = 1.0 - theta;
  const double fl = f_lip_norm;
  const double sq = std::sqrt(theta);
  return 30.0 * d * d * d * detail::max_c2_c4(c2, c4) * (sup_f * d3h + d2h) / (om * om) +
         2.0 * d * d * d2h * fl * fl / (1.0 / sq - sq) + 4.0 * d * b0 * fl * d1h + 2.0 * d * d1h * fl / sq;
}

/// Constant C~ of the univariate circle-map Wasserstein bound.
inline double circle_C_tilde(double c2, double c4, double sup_f, double f_lip_norm, double b0, double theta) {
  detail::check_theta(theta, "circle_C_tilde");
  const double om = 1.0 - theta;
  const double fl = f_lip_norm;
  const double sq = std::sqrt(theta);
  return 60.0 * detail::max_c2_c4(c2, c4) * (1.0 + sup_f) / (om * om) + 4.0 * fl * fl / (1.0 / sq - sq) +
         8.0 * b0 * fl + 4.0 * fl / sq;
}

inline double circle_C_tilde(const DecayConstants& k, double sup_f, double f_lip_norm) {
  return circle_C_tilde(k.C2, k.C4, sup_f, f_lip_norm, k.B0, k.theta);
}

/// C N^{-1/2} log N, valid for N >= 16 / (1 - theta)^2 with Sigma_N positive definite.
inline BoundReport circle_multivar_bound(double c, std::int64_t n, double theta) {
  BoundReport r;
  r.name = "circle_multivariate";
  r.N = n;
  const double nd = static_cast<double>(n);
  r.add("rate", c * std::log(nd) / std::sqrt(nd));
  r.flags["valid_N"] = nd >= min_valid_N(theta);
  return r;
}

/// C~ max{1, C0^-2} N^{-1/2 + 2p} log N, for sigma_N >= C0 N^{-p}.
inline BoundReport circle_wasserstein_bound(double c_tilde, double c0, double p, std::int64_t n, double theta) {
  if (!(c0 > 0.0) || p < 0.0) throw ConstraintError("circle_wasserstein_bound: need C0 > 0, p >= 0");
  BoundReport r;
  r.name = "circle_wasserstein";
  r.N = n;
  const double nd = static_cast<double>(n);
  r.add("rate", c_tilde * std::max(1.0, 1.0 / (c0 * c0)) * std::pow(nd, -0.5 + 2.0 * p) * std::log(nd));
  r.flags["valid_N"] = nd >= min_valid_N(theta);
  return r;
}

/// max{C~, 2} N^{-1/6} log N, variance-free.
inline BoundReport circle_variance_free_bound(double c_tilde, std::int64_t n, double theta) {
  BoundReport r;
  r.name = "circle_variance_free";
  r.N = n;
  const double nd = static_cast<double>(n);
  r.add("rate", std::max(c_tilde, 2.0) * std::pow(nd, -1.0 / 6.0) * std::log(nd));
  r.flags["valid_N"] = nd >= min_valid_N(theta);
  return r;
}

/// C~ max{C0^{-1/2}, C0^{-3/2}} N^{1 - 3p/2} log N for S_N / s_N, s_N^2 >= C0 N^p.
inline BoundReport circle_self_normalized_bound(double c_tilde, double c0, double p, std::int64_t n, double theta) {
  if (!(c0 > 0.0) || p < 0.0 || p > 1.0)
    throw ConstraintError("circle_self_normalized_bound: need C0 > 0, 0 <= p <= 1");
  BoundReport r;
  r.name = "circle_self_normalized";
  r.N = n;
  const double nd = static_cast<double>(n);
  r.add("rate", c_tilde * std::max(std::pow(c0, -0.5), std::pow(c0, -1.5)) * std::pow(nd, 1.0 - 1.5 * p) *
                    std::log(nd));
  r.flags["valid_N"] = nd >= min_valid_N(theta);
  return r;
}

/// ||h|| (2 Lip(g) lambda^{-floor(m/2)} + ||g|| D0 theta^{ceil(m/2)}).
inline double splitting_bound(std::int64_t m, double lip_g, double sup_g, double sup_h, double lambda, double d0,
                              double theta) {
  if (m < 0) throw ConstraintError("splitting_bound: m must be >= 0");
  if (!(lambda > 1.0)) throw ConstraintError("splitting_bound: lambda must be > 1");
  const auto lo = static_cast<double>(m / 2);
  const auto hi = static_cast<double>((m + 1) / 2);
  return sup_h * (2.0 * lip_g * std::pow(lambda, -lo) + sup_g * d0 * std::pow(theta, hi));
}

/// L* = A* lambda (1 - 1/lambda)^{-2}, reported as metadata.
inline double l_star(double lambda, double a_star) {
  if (!(lambda > 1.0)) throw ConstraintError("l_star: lambda must be > 1");
  const double q = 1.0 - 1.0 / lambda;
  return a_star * lambda / (q * q);
}

}  // namespace seqclt
