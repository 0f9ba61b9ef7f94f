#pragma once

// Expanding circle maps T(x) = k x + a sin(2 pi (x + phi)) mod 1.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "seqclt/errors.hpp"

namespace seqclt {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces x to [0, 1).
inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r -= 1.0;
  return r;
}

/// Natural metric on R/Z.
inline double circle_distance(double x, double y) {
  const double d = std::abs(wrap_unit(x - y));
  return std::min(d, 1.0 - d);
}

struct MapBounds {
  double lambda;  ///< lower bound of T'
  double a_star;  ///< upper bound of |T''|
};

/// Member of the family T(x) = degree*x + amplitude*sin(2 pi (x + phase)) mod 1.
///
/// Construction enforces |amplitude| < (degree - 1) / (2 pi), which makes
/// inf T' = degree - 2 pi |amplitude| > 1; T is then a degree-to-one covering.
class CircleMap {
 public:
  CircleMap(int degree, double amplitude, double phase = 0.0)
      : degree_(degree), amplitude_(amplitude), phase_(wrap_unit(phase)) {
    if (degree < 2) throw ConstraintError("CircleMap: degree must be >= 2");
    if (!std::isfinite(amplitude)) throw ConstraintError("CircleMap: amplitude must be finite");
    if (lambda() <= 1.0) {
      std::ostringstream os;
      os << "CircleMap: not expanding (degree " << degree << ", amplitude " << amplitude
         << " gives lambda = " << lambda() << " <= 1)";
      throw ConstraintError(os.str());
    }
  }

  int degree() const { return degree_; }
  double amplitude() const { return amplitude_; }
  double phase() const { return phase_; }

  double lambda() const { return degree_ - kTwoPi * std::abs(amplitude_); }
  double a_star() const { return kTwoPi * kTwoPi * std::abs(amplitude_); }

  /// Lift F: R -> R with F(x + 1) = F(x) + degree.
  double lift(double x) const { return degree_ * x + amplitude_ * std::sin(kTwoPi * (x + phase_)); }

  double operator()(double x) const { return wrap_unit(lift(x)); }

  double derivative(double x) const {
    return degree_ + kTwoPi * amplitude_ * std::cos(kTwoPi * (x + phase_));
  }

  double second_derivative(double x) const {
    return -kTwoPi * kTwoPi * amplitude_ * std::sin(kTwoPi * (x + phase_));
  }

  bool operator==(const CircleMap&) const = default;

 private:
  int degree_;
  double amplitude_;
  double phase_;
};

inline double map_eval(const CircleMap& map, double x) { return map(x); }

/// (lambda, A*) certified by the closed form; throws when not expanding.
inline MapBounds map_bounds(const CircleMap& map) {
  const MapBounds b{map.lambda(), map.a_star()};
  if (b.lambda <= 1.0) throw ConstraintError("map_bounds: lambda <= 1");
  return b;
}

namespace detail {

// Solves lift(y) = target on [0, 1], where lift is strictly increasing and
// lift(0) <= target <= lift(1). Bisection to width 1e-13, then one Newton
// polish clipped to the final bracket.
inline double solve_branch(const CircleMap& map, double target) {
  double lo = 0.0;
  double hi = 1.0;
  double flo = map.lift(lo) - target;
  double fhi = map.lift(hi) - target;
  if (flo > 0.0 || fhi < 0.0) {
    // Round-off at the branch ends.
    if (flo > 0.0 && flo < 1e-12) return 0.0;
    if (fhi < 0.0 && fhi > -1e-12) return 1.0;
    throw NumericalError("preimages: target outside monotone branch");
  }
  int iterations = 0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    const double fm = map.lift(mid) - target;
    if (fm < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (++iterations > 200) throw NumericalError("preimages: bisection did not converge");
  }
  double y = 0.5 * (lo + hi);
  const double step = (map.lift(y) - target) / map.derivative(y);
  const double polished = y - step;
  if (polished >= lo - 1e-13 && polished <= hi + 1e-13) y = polished;
  return y;
}

}  // namespace detail

/// The `degree` preimages of x, sorted, one per monotone branch.
inline std::vector<double> preimages(const CircleMap& map, double x) {
  const double base = map.lift(0.0);
  const int k = map.degree();
  // Targets x + j with base <= x + j < base + k.
  const double j0 = std::ceil(base - x);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int b = 0; b < k; ++b) {
    double y = detail::solve_branch(map, x + j0 + b);
    out.push_back(wrap_unit(y));
  }
  std::sort(out.begin(), out.end());
  for (const double y : out) {
    if (circle_distance(map(y), x) > 1e-12) throw NumericalError("preimages: residual too large");
  }
  return out;
}

/// Grid approximation of d_C1(T1, T2) = sup d(T1 x, T2 x) + ||T1' - T2'||_inf
/// on the nodes j / grid.
inline double c1_distance(const CircleMap& m1, const CircleMap& m2, int grid = 4096) {
  if (grid < 2) throw ConstraintError("c1_distance: grid must be >= 2");
  double pos = 0.0;
  double der = 0.0;
  for (int j = 0; j < grid; ++j) {
    const double x = static_cast<double>(j) / grid;
    pos = std::max(pos, circle_distance(m1(x), m2(x)));
    der = std::max(der, std::abs(m1.derivative(x) - m2.derivative(x)));
  }
  return pos + der;
}

}  // namespace seqclt
