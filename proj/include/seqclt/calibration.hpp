#pragma once

// Empirical decay constants for a schedule: theta and D0 from L1 contraction
// of probe densities, C2 from pair correlations, C4 from four-point
// correlations on a small index set, B0 = D0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "seqclt/constants.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"
#include "seqclt/initial_density.hpp"
#include "seqclt/observable.hpp"
#include "seqclt/schedule.hpp"
#include "seqclt/statistics.hpp"
#include "seqclt/transfer.hpp"

namespace seqclt {

struct CalibrationOptions {
  int probes = 5;
  ThetaOptions theta{30, kDefaultGridSize, 1e-11, {0, 1}};
  int fourth_order_indices = 8;  ///< quadruples i <= j <= k <= l below this
};

struct Calibration {
  DecayConstants constants;
  ThetaEstimate theta_estimate;
  double theta_raw = 0.0;  ///< before the 1 / lambda_min floor
  bool theta_floored = false;
};

/// Theta, D0 (= B0) and the floor theta >= 1 / lambda_min.
inline Calibration calibrate_theta(const MapSchedule& schedule, const InitialDensity& initial,
                                   const CalibrationOptions& opt = {}) {
  Calibration cal;
  ThetaOptions topt = opt.theta;
  std::vector<std::int64_t> starts;
  for (const auto s : topt.start_times)
    if (s + topt.steps <= schedule.horizon()) starts.push_back(s);
  if (starts.empty()) throw ConstraintError("calibrate: schedule horizon shorter than the probe window");
  topt.start_times = starts;
  cal.theta_estimate = estimate_theta(schedule, opt.probes, topt);
  cal.theta_raw = cal.theta_estimate.theta;
  const double floor = 1.0 / schedule.lambda_min();
  double theta = cal.theta_raw;
  if (theta < floor) {
    theta = floor;
    cal.theta_floored = true;
  }
  double d0 = 0.0;
  for (const auto& p : cal.theta_estimate.probes)
    for (int n = 0; n < p.usable; ++n)
      d0 = std::max(d0, p.distances[static_cast<std::size_t>(n)] / std::pow(theta, n));
  DecayConstants& k = cal.constants;
  k.theta = theta;
  k.D0 = d0;
  k.B0 = d0;
  k.L0 = initial.log_lip();
  k.source = DecayConstants::Source::Calibrated;
  return cal;
}

/// max over (i, j) of |mu(fbar^i fbar^j)| / theta^{j-i} from a moment table.
inline double calibrate_C2(const MomentTable& table, double theta) { return table.max_scaled_correlation(theta); }

/// max over i <= j <= k <= l < count and all coordinates of
/// |mu4| / theta^{max(j-i, l-k)} and |mu4 - mu(ij) mu(kl)| / theta^{k-j}.
inline double calibrate_C4(const MapSchedule& schedule, const Observable& f, const GridDensity& rho0, int count,
                           double theta) {
  if (count < 1) throw ConstraintError("calibrate_C4: need at least one index");
  const auto last = std::min<std::int64_t>(count - 1, schedule.horizon());
  const DensityChain chain(schedule, f, rho0, last);
  const auto table = MomentTable::build(schedule, f, rho0, last + 1, static_cast<int>(last));
  const int d = f.dim();
  double best = 0.0;
  for (std::int64_t i = 0; i <= last; ++i)
    for (std::int64_t j = i; j <= last; ++j)
      for (std::int64_t k = j; k <= last; ++k)
        for (std::int64_t l = k; l <= last; ++l)
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
              for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e) {
                  const double m4 = fourth_correlation(schedule, chain, a, b, c, e, i, j, k, l);
                  const double c_ij = table.corr(i, static_cast<int>(j - i))(a, b);
                  const double c_kl = table.corr(k, static_cast<int>(l - k))(c, e);
                  const double r1 = std::abs(m4) / std::pow(theta, static_cast<double>(std::max(j - i, l - k)));
                  const double r2 = std::abs(m4 - c_ij * c_kl) / std::pow(theta, static_cast<double>(k - j));
                  best = std::max({best, r1, r2});
                }
  return best;
}

/// Full pipeline; `table` must cover the indices on which C2 is wanted.
inline Calibration calibrate(const MapSchedule& schedule, const Observable& f, const InitialDensity& initial,
                             const MomentTable& table, int grid, const CalibrationOptions& opt = {}) {
  CalibrationOptions o = opt;
  o.theta.grid = grid;
  Calibration cal = calibrate_theta(schedule, initial, o);
  DecayConstants& k = cal.constants;
  const GridDensity rho0 = GridDensity::from_initial(initial, grid);
  k.C2 = calibrate_C2(table, k.theta);
  k.C4 = calibrate_C4(schedule, f, rho0, o.fourth_order_indices, k.theta);
  // A zero observable has vanishing correlations; keep the constants positive.
  k.C2 = std::max(k.C2, 1e-300);
  k.C4 = std::max(k.C4, 1e-300);
  return cal;
}

}  // namespace seqclt
