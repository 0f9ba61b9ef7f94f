#pragma once

// Collocation discretization of the transfer operator
//   (L g)(x_j) = sum_{T y = x_j} g~(y) / T'(y),
// g~ the periodic linear interpolant of the grid values.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>
#include <vector>

#include "seqclt/circle_map.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"
#include "seqclt/schedule.hpp"

namespace seqclt {

namespace detail {

// Safeguarded Newton for lift(y) = target on [0, 1]; used to build transfer
// tables, where a bisection per node would dominate the run time. Accuracy
// matches solve_branch (|lift(y) - target| at round-off).
inline double solve_branch_fast(const CircleMap& map, double target, double guess) {
  double lo = 0.0;
  double hi = 1.0;
  double y = std::clamp(guess, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = map.lift(y) - target;
    if (f == 0.0) return y;
    if (f < 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    double next = y - f / map.derivative(y);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) < 1e-15 || hi - lo < 1e-15) return next;
    y = next;
  }
  throw NumericalError("transfer table: preimage solve did not converge");
}

}  // namespace detail

/// Precomputed branch table of L_T on an M-point grid.
class TransferOperator {
 public:
  TransferOperator(const CircleMap& map, int m) : map_(map), m_(m), k_(map.degree()) {
    check_grid_size(m);
    entries_.resize(static_cast<std::size_t>(m) * static_cast<std::size_t>(k_));
    const double base = map.lift(0.0);
    for (int j = 0; j < m; ++j) {
      const double x = static_cast<double>(j) / m;
      const double j0 = std::ceil(base - x);
      for (int b = 0; b < k_; ++b) {
        const double target = x + j0 + b;
        const double guess = (target - base) / k_;
        double y = detail::solve_branch_fast(map, target, guess);
        const double inv_d = 1.0 / map.derivative(y);
        y = wrap_unit(y);
        const double s = y * m;
        int i0 = static_cast<int>(std::floor(s));
        double w = s - i0;
        if (i0 >= m) {
          i0 -= m;
        }
        entries_[index(j, b)] = Entry{static_cast<std::uint32_t>(i0), w, inv_d};
      }
    }
  }

  const CircleMap& map() const { return map_; }
  int size() const { return m_; }

  /// out = L in, no renormalization (valid for signed measures).
  void apply(const double* in, double* out) const {
    const auto mask = static_cast<std::uint32_t>(m_ - 1);
    const Entry* e = entries_.data();
    for (int j = 0; j < m_; ++j) {
      double acc = 0.0;
      for (int b = 0; b < k_; ++b, ++e) {
        const double g0 = in[e->i0];
        const double g1 = in[(e->i0 + 1) & mask];
        acc += (g0 + e->w * (g1 - g0)) * e->inv_d;
      }
      out[j] = acc;
    }
  }

  std::vector<double> apply(const std::vector<double>& in) const {
    if (static_cast<int>(in.size()) != m_) throw ConstraintError("TransferOperator: grid size mismatch");
    std::vector<double> out(in.size());
    apply(in.data(), out.data());
    return out;
  }

 private:
  struct Entry {
    std::uint32_t i0;
    double w;
    double inv_d;
  };

  std::size_t index(int j, int b) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(b);
  }

  CircleMap map_;
  int m_;
  int k_;
  std::vector<Entry> entries_;
};

/// Process-wide FIFO cache of transfer tables keyed by (map, M).
class TransferCache {
 public:
  static TransferCache& instance() {
    static TransferCache cache;
    return cache;
  }

  std::shared_ptr<const TransferOperator> get(const CircleMap& map, int m) {
    const Key key{map.degree(), std::bit_cast<std::uint64_t>(map.amplitude()),
                  std::bit_cast<std::uint64_t>(map.phase()), m};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (const auto it = tables_.find(key); it != tables_.end()) return it->second;
    }
    auto table = std::make_shared<const TransferOperator>(map, m);
    std::lock_guard<std::mutex> lock(mutex_);
    const auto [it, inserted] = tables_.emplace(key, table);
    if (inserted) {
      order_.push_back(key);
      while (order_.size() > capacity_) {
        tables_.erase(order_.front());
        order_.pop_front();
      }
    }
    return it->second;
  }

  void set_capacity(std::size_t capacity) {
    std::lock_guard<std::mutex> lock(mutex_);
    capacity_ = std::max<std::size_t>(capacity, 1);
  }

 private:
  using Key = std::tuple<int, std::uint64_t, std::uint64_t, int>;
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<const TransferOperator>> tables_;
  std::deque<Key> order_;
  std::size_t capacity_ = 256;
};

inline std::shared_ptr<const TransferOperator> transfer_table(const CircleMap& map, int m) {
  return TransferCache::instance().get(map, m);
}

inline GridDensity transfer_apply(const CircleMap& map, const GridDensity& g) {
  return GridDensity(transfer_table(map, g.size())->apply(g.values()));
}

/// Signed push without renormalization.
inline std::vector<double> transfer_apply_signed(const CircleMap& map, const std::vector<double>& g) {
  check_grid_size(static_cast<int>(g.size()));
  return transfer_table(map, static_cast<int>(g.size()))->apply(g);
}

/// rho_n = L_n ... L_1 rho0.
inline GridDensity pushforward_density(const MapSchedule& schedule, const GridDensity& rho0, std::int64_t n) {
  if (n < 0) throw ConstraintError("pushforward_density: negative n");
  if (n > schedule.horizon()) throw ConstraintError("pushforward_density: n exceeds schedule horizon");
  GridDensity rho = rho0;
  for (std::int64_t i = 1; i <= n; ++i) rho = transfer_apply(schedule.map(i), rho);
  return rho;
}

/// Signed pushes of `g` through maps first, first + 1, ..., first + steps - 1,
/// returning all intermediate vectors (index 0 is g itself).
inline std::vector<std::vector<double>> signed_push_sequence(const MapSchedule& schedule, std::vector<double> g,
                                                             std::int64_t first, std::int64_t steps) {
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(g);
  for (std::int64_t s = 0; s < steps; ++s) {
    g = transfer_apply_signed(schedule.map(first + s), g);
    out.push_back(g);
  }
  return out;
}

struct InvariantDensityResult {
  GridDensity density;
  double residual;  ///< ||L rho - rho||_{L1}
  int iterations;
};

/// Power iteration from the uniform density until the L1 step drops below tol.
inline InvariantDensityResult invariant_density_detailed(const CircleMap& map, double tol,
                                                         int m = kDefaultGridSize, int max_iter = 10000) {
  if (!(tol > 0.0)) throw ConstraintError("invariant_density: tol must be > 0");
  const auto table = transfer_table(map, m);
  std::vector<double> rho(static_cast<std::size_t>(m), 1.0);
  std::vector<double> next(rho.size());
  for (int it = 1; it <= max_iter; ++it) {
    table->apply(rho.data(), next.data());
    const double mass = grid_mean(next);
    for (double& v : next) v /= mass;
    const double step = l1_distance(rho, next);
    rho.swap(next);
    if (step < tol) return {GridDensity(rho), step, it};
  }
  std::ostringstream os;
  os << "invariant_density: no convergence after " << max_iter << " iterations";
  throw NumericalError(os.str());
}

inline GridDensity invariant_density(const CircleMap& map, double tol, int m = kDefaultGridSize,
                                     int max_iter = 10000) {
  return invariant_density_detailed(map, tol, m, max_iter).density;
}

/// Pair of probe densities whose pushforwards are compared.
struct ProbePair {
  std::function<double(double)> first;
  std::function<double(double)> second;
};

/// Normalized von Mises bump exp(kappa cos(2 pi (x - c))) (unnormalized; the
/// grid constructor normalizes). All Fourier modes are present, so distances
/// do not collapse after one step of the doubling map.
inline std::function<double(double)> von_mises_probe(double kappa, double centre) {
  return [kappa, centre](double x) { return std::exp(kappa * std::cos(kTwoPi * (x - centre))); };
}

/// Default probe catalog: pairs of bumps of different widths and centres.
inline std::vector<ProbePair> probe_catalog(int count) {
  static const double params[][4] = {
      {2.0, 0.0, 2.0, 0.3}, {1.0, 0.1, 3.0, 0.7}, {4.0, 0.3, 0.0, 0.0},
      {0.5, 0.2, 2.5, 0.9}, {3.0, 0.6, 1.5, 0.05}, {1.5, 0.45, 1.5, 0.8},
      {2.5, 0.8, 0.8, 0.35}, {3.5, 0.15, 2.0, 0.65},
  };
  constexpr int available = static_cast<int>(sizeof params / sizeof params[0]);
  if (count < 1 || count > available) {
    std::ostringstream os;
    os << "probe_catalog: count must be in [1, " << available << "]";
    throw ConstraintError(os.str());
  }
  std::vector<ProbePair> out;
  for (int i = 0; i < count; ++i) {
    out.push_back({von_mises_probe(params[i][0], params[i][1]), von_mises_probe(params[i][2], params[i][3])});
  }
  return out;
}

struct ProbeDecay {
  std::vector<double> distances;  ///< d_n, n = 0 .. steps
  int usable = 0;                 ///< length of the pre-floor prefix used in the fit
  double slope = 0.0;             ///< least-squares slope of log d_n
  double intercept = 0.0;
  double r2 = 0.0;
};

struct ThetaEstimate {
  double theta = 0.0;         ///< max over probes of exp(slope)
  double d0_intercept = 0.0;  ///< max over probes of exp(intercept)
  double d0_envelope = 0.0;   ///< max over probes and n of d_n / theta^n
  double min_r2 = 1.0;
  std::vector<ProbeDecay> probes;
};

struct ThetaOptions {
  int steps = 30;             ///< composition lengths 0 .. steps
  int grid = kDefaultGridSize;
  double floor = 1e-11;       ///< distances below this are treated as at the floating-point floor
  std::vector<std::int64_t> start_times{0};
};

namespace detail {

inline ProbeDecay fit_probe(std::vector<double> d, double floor) {
  ProbeDecay out;
  out.distances = std::move(d);
  int usable = 0;
  while (usable < static_cast<int>(out.distances.size()) && out.distances[static_cast<std::size_t>(usable)] > floor) {
    ++usable;
  }
  out.usable = usable;
  if (usable < 2) return out;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int n = 0; n < usable; ++n) {
    const double y = std::log(out.distances[static_cast<std::size_t>(n)]);
    sx += n;
    sy += y;
    sxx += static_cast<double>(n) * n;
    sxy += n * y;
    syy += y * y;
  }
  const double cnt = usable;
  const double vx = sxx - sx * sx / cnt;
  const double vy = syy - sy * sy / cnt;
  const double cxy = sxy - sx * sy / cnt;
  out.slope = cxy / vx;
  out.intercept = (sy - out.slope * sx) / cnt;
  out.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  return out;
}

}  // namespace detail

/// Empirical contraction rate of the schedule's pushforwards in L1, from the
/// given probe pairs started at each of `options.start_times`.
inline ThetaEstimate estimate_theta(const MapSchedule& schedule, const std::vector<ProbePair>& probes,
                                    const ThetaOptions& options = {}) {
  if (probes.empty()) throw ConstraintError("estimate_theta: no probes");
  if (options.steps < 1) throw ConstraintError("estimate_theta: steps must be >= 1");
  ThetaEstimate est;
  for (const auto start : options.start_times) {
    if (start < 0 || start + options.steps > schedule.horizon())
      throw ConstraintError("estimate_theta: probe window exceeds schedule horizon");
    for (const auto& probe : probes) {
      GridDensity a = GridDensity::from_function(probe.first, options.grid);
      GridDensity b = GridDensity::from_function(probe.second, options.grid);
      std::vector<double> d{l1_distance(a, b)};
      for (int n = 1; n <= options.steps; ++n) {
        const CircleMap& map = schedule.map(start + n);
        a = transfer_apply(map, a);
        b = transfer_apply(map, b);
        d.push_back(l1_distance(a, b));
      }
      est.probes.push_back(detail::fit_probe(std::move(d), options.floor));
    }
  }
  for (const auto& p : est.probes) {
    if (p.usable < 2) {
      std::ostringstream os;
      os << "estimate_theta: probe distances reach the floor after " << p.usable
         << " usable point(s); use richer probes";
      throw NumericalError(os.str());
    }
    est.theta = std::max(est.theta, std::exp(p.slope));
    est.d0_intercept = std::max(est.d0_intercept, std::exp(p.intercept));
    est.min_r2 = std::min(est.min_r2, p.r2);
  }
  if (!(est.theta > 0.0 && est.theta < 1.0)) {
    std::ostringstream os;
    os << "estimate_theta: fitted rate " << est.theta << " is not in (0, 1)";
    throw NumericalError(os.str());
  }
  for (const auto& p : est.probes) {
    for (int n = 0; n < p.usable; ++n) {
      est.d0_envelope = std::max(est.d0_envelope, p.distances[static_cast<std::size_t>(n)] / std::pow(est.theta, n));
    }
  }
  return est;
}

inline ThetaEstimate estimate_theta(const MapSchedule& schedule, int probes, const ThetaOptions& options = {}) {
  if (probes < 2) throw ConstraintError("estimate_theta: probes must be >= 2");
  return estimate_theta(schedule, probe_catalog(probes), options);
}

}  // namespace seqclt
