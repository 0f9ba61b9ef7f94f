#pragma once

#include <cmath>

#include "seqclt/circle_map.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/random.hpp"

namespace seqclt {

/// rho(x) = 1 + epsilon sin(2 pi x), |epsilon| < 1.
class InitialDensity {
 public:
  explicit InitialDensity(double epsilon = 0.0) : epsilon_(epsilon) {
    if (!(std::abs(epsilon) < 1.0)) throw ConstraintError("InitialDensity: |epsilon| must be < 1");
  }

  double epsilon() const { return epsilon_; }
  double operator()(double x) const { return 1.0 + epsilon_ * std::sin(kTwoPi * x); }
  double cdf(double x) const { return x + epsilon_ * (1.0 - std::cos(kTwoPi * x)) / kTwoPi; }

  /// Lipschitz constant of log rho (an upper bound of sup |rho'/rho|).
  double log_lip() const { return kTwoPi * std::abs(epsilon_) / (1.0 - std::abs(epsilon_)); }

  /// CDF^{-1}(u) for u in [0, 1]: Newton from u, bisection fallback whenever a
  /// step leaves the bracket. Residual |CDF(x) - u| <= 1e-12.
  double inverse_cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return wrap_unit(1.0);
    if (epsilon_ == 0.0) return u;
    double lo = 0.0;
    double hi = 1.0;
    double x = u;
    for (int it = 0; it < 200; ++it) {
      const double f = cdf(x) - u;
      if (std::abs(f) <= 1e-14) return x;
      if (f < 0.0) {
        lo = x;
      } else {
        hi = x;
      }
      double next = x - f / (*this)(x);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      x = next;
      if (hi - lo < 1e-16) return x;
    }
    throw NumericalError("InitialDensity::inverse_cdf did not converge");
  }

 private:
  double epsilon_;
};

inline double sample_initial(const InitialDensity& density, Stream& rng) {
  return density.inverse_cdf(rng.uniform());
}

}  // namespace seqclt
