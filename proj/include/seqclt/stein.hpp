#pragma once

// Univariate Stein equation sigma^2 A'(w) - w A(w) = h(w) - Phi_{sigma^2}(h),
// solved by
//   A(w) = sigma^{-2} e^{w^2/(2 sigma^2)} int_{-inf}^w (h - Phi(h)) e^{-t^2/(2 sigma^2)} dt.
// The integral is propagated cell by cell with the factor
// exp((w_{k+1}^2 - w_k^2) / (2 sigma^2)) <= 1: from the left end for w <= 0,
// and with the equivalent right-tail form from the right end for w >= 0, so
// e^{w^2/(2 sigma^2)} is never formed.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "seqclt/errors.hpp"

namespace seqclt {

/// A 1-Lipschitz test function with its (one-sided) derivative and kinks.
struct SteinTestFunction {
  std::string name;
  std::function<double(double)> h;
  std::function<double(double)> dh;  ///< right derivative at kinks
  std::vector<double> kinks;

  static std::vector<SteinTestFunction> catalog() {
    return {
        {"identity", [](double w) { return w; }, [](double) { return 1.0; }, {}},
        {"abs", [](double w) { return std::abs(w); }, [](double w) { return w >= 0.0 ? 1.0 : -1.0; }, {0.0}},
        {"sin", [](double w) { return std::sin(w); }, [](double w) { return std::cos(w); }, {}},
        {"clip", [](double w) { return std::clamp(w, -1.0, 1.0); },
         [](double w) { return (w >= -1.0 && w < 1.0) ? 1.0 : 0.0; }, {-1.0, 1.0}},
        {"half_cos2", [](double w) { return 0.5 * std::cos(2.0 * w); }, [](double w) { return -std::sin(2.0 * w); },
         {}},
    };
  }
};

namespace detail {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kGlNodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                                -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                                0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGlWeights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                  0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                  0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_legendre(double a, double b, F&& f) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t q = 0; q < kGlNodes.size(); ++q) s += kGlWeights[q] * f(mid + half * kGlNodes[q]);
  return s * half;
}

}  // namespace detail

struct SteinSolution1D {
  std::vector<double> w;    ///< nodes
  std::vector<double> A;
  std::vector<double> dA;   ///< A'
  std::vector<double> d2A;  ///< A'' (one-sided at kinks of h)
  double sigma_sq = 1.0;
  double phi_h = 0.0;       ///< Phi_{sigma^2}(h)
  double window = 0.0;      ///< half-width of the reported window
  double residual = 0.0;    ///< max cell residual of the integrated equation, per unit length
  SteinTestFunction h;

  double sup_A(double half_width) const { return sup_over(A, half_width); }
  double sup_dA(double half_width) const { return sup_over(dA, half_width); }
  double sup_d2A(double half_width) const { return sup_over(d2A, half_width); }

  /// Cubic Hermite interpolation of (A, A') at w; also returns A'.
  std::pair<double, double> eval(double x) const {
    if (x < w.front() || x > w.back()) throw ConstraintError("SteinSolution1D: point outside solve grid");
    auto it = std::upper_bound(w.begin(), w.end(), x);
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - w.begin() - 1, 0));
    if (k + 1 >= w.size()) k = w.size() - 2;
    const double hk = w[k + 1] - w[k];
    const double s = (x - w[k]) / hk;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    const double a = h00 * A[k] + h10 * hk * dA[k] + h01 * A[k + 1] + h11 * hk * dA[k + 1];
    const double d00 = 6 * s * s - 6 * s;
    const double d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -d00;
    const double d11 = 3 * s * s - 2 * s;
    const double da = (d00 * A[k] + d01 * A[k + 1]) / hk + d10 * dA[k] + d11 * dA[k + 1];
    return {a, da};
  }

 private:
  double sup_over(const std::vector<double>& v, double half_width) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (std::abs(w[i]) <= half_width) s = std::max(s, std::abs(v[i]));
    return s;
  }
};

struct SteinOptions {
  double window_sigmas = 10.0;  ///< reported window [-k sigma, k sigma]
  int nodes = 20000;            ///< nodes across the reported window
  double extension = 1.5;       ///< the recursion starts at extension * window
};

inline SteinSolution1D stein_solve_1d(const SteinTestFunction& h, double sigma_sq, const SteinOptions& opt = {}) {
  if (!(sigma_sq > 0.0)) throw ConstraintError("stein_solve_1d: sigma_sq must be > 0");
  if (opt.nodes < 4 || !(opt.window_sigmas > 0.0) || !(opt.extension >= 1.0))
    throw ConstraintError("stein_solve_1d: invalid options");
  const double sigma = std::sqrt(sigma_sq);
  const double window = opt.window_sigmas * sigma;
  const double outer = opt.extension * window;
  const double step = 2.0 * window / (opt.nodes - 1);
  const int half_cells = static_cast<int>(std::ceil(outer / step));

  std::vector<double> w;
  for (int k = -half_cells; k <= half_cells; ++k) w.push_back(k * step);
  for (const double z : h.kinks)
    if (std::abs(z) < outer) w.push_back(z);
  std::sort(w.begin(), w.end());
  w.erase(std::unique(w.begin(), w.end(), [step](double a, double b) { return std::abs(a - b) < 1e-9 * step; }),
          w.end());
  const std::size_t n = w.size();

  // Phi(h) with the same cell quadrature, so that the left and right
  // recursions agree at 0 up to round-off.
  const double inv2s = 1.0 / (2.0 * sigma_sq);
  double phi = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k)
    phi += detail::gauss_legendre(w[k], w[k + 1], [&](double t) { return h.h(t) * std::exp(-t * t * inv2s); });
  phi /= std::sqrt(2.0 * std::numbers::pi) * sigma;

  auto hb = [&](double t) { return h.h(t) - phi; };
  std::vector<double> A(n, 0.0);
  const std::size_t zero =
      static_cast<std::size_t>(std::lower_bound(w.begin(), w.end(), -1e-12 * step) - w.begin());

  // Left recursion, initialized with the leading Mills-ratio term -hb(w) / w.
  A[0] = -hb(w[0]) / w[0];
  for (std::size_t k = 0; k < zero; ++k) {
    const double a = w[k];
    const double b = w[k + 1];
    const double decay = std::exp((b * b - a * a) * inv2s);
    const double local =
        detail::gauss_legendre(a, b, [&](double t) { return hb(t) * std::exp((b * b - t * t) * inv2s); });
    A[k + 1] = decay * A[k] + local / sigma_sq;
  }
  const double left_at_zero = A[zero];
  A[n - 1] = -hb(w[n - 1]) / w[n - 1];
  for (std::size_t k = n - 1; k > zero; --k) {
    const double a = w[k - 1];
    const double b = w[k];
    const double decay = std::exp((a * a - b * b) * inv2s);
    const double local =
        detail::gauss_legendre(a, b, [&](double t) { return hb(t) * std::exp((a * a - t * t) * inv2s); });
    A[k - 1] = decay * A[k] - local / sigma_sq;
  }
  A[zero] = 0.5 * (A[zero] + left_at_zero);

  SteinSolution1D sol;
  sol.sigma_sq = sigma_sq;
  sol.phi_h = phi;
  sol.window = window;
  sol.h = h;
  sol.dA.resize(n);
  sol.d2A.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    sol.dA[k] = (w[k] * A[k] + hb(w[k])) / sigma_sq;
    sol.d2A[k] = (A[k] + w[k] * sol.dA[k] + h.dh(w[k])) / sigma_sq;
  }
  sol.w = std::move(w);
  sol.A = std::move(A);

  // Integrated residual per cell: sigma^2 (A(b) - A(a)) - int_a^b (t A + hb),
  // with A inside the cell from the Hermite interpolant.
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double a = sol.w[k];
    const double b = sol.w[k + 1];
    if (std::abs(a) > window || std::abs(b) > window) continue;
    const double integral = detail::gauss_legendre(a, b, [&](double t) { return t * sol.eval(t).first + hb(t); });
    const double r = sigma_sq * (sol.A[k + 1] - sol.A[k]) - integral;
    worst = std::max(worst, std::abs(r) / (b - a));
  }
  sol.residual = worst;
  return sol;
}

struct SteinIdentityResult {
  double lhs;  ///< mean h(W) - Phi(h)
  double rhs;  ///< mean sigma^2 A'(W) - W A(W)
  double gap;
  bool window_extended;
};

/// Both sides of the Stein identity over one sample set. Samples outside the
/// solution window trigger one re-solve on a window covering them.
inline SteinIdentityResult stein_identity_check(const std::vector<double>& samples, const SteinTestFunction& h,
                                                double sigma_sq, const SteinOptions& opt = {}) {
  if (samples.empty()) throw ConstraintError("stein_identity_check: no samples");
  double reach = 0.0;
  for (const double x : samples) reach = std::max(reach, std::abs(x));
  SteinOptions o = opt;
  SteinSolution1D sol = stein_solve_1d(h, sigma_sq, o);
  bool extended = false;
  if (reach > sol.window) {
    const double sigma = std::sqrt(sigma_sq);
    const double needed = 1.1 * reach / sigma;
    o.nodes = static_cast<int>(std::ceil(o.nodes * needed / o.window_sigmas));
    o.window_sigmas = needed;
    sol = stein_solve_1d(h, sigma_sq, o);
    extended = true;
    if (reach > sol.window) throw ConstraintError("stein_identity_check: samples outside the extended window");
  }
  double lhs = 0.0;
  double rhs = 0.0;
  for (const double x : samples) {
    const auto [a, da] = sol.eval(x);
    lhs += h.h(x) - sol.phi_h;
    rhs += sigma_sq * da - x * a;
  }
  const auto m = static_cast<double>(samples.size());
  lhs /= m;
  rhs /= m;
  return {lhs, rhs, std::abs(lhs - rhs), extended};
}

}  // namespace seqclt
