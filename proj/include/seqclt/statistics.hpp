#pragma once

// Moments of Birkhoff sums along a schedule. Exact quantities come from
// transfer-operator pushes on the grid; Monte Carlo quantities from orbits of
// sampled initial points.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqclt/circle_map.hpp"
#include "seqclt/constants.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"
#include "seqclt/initial_density.hpp"
#include "seqclt/observable.hpp"
#include "seqclt/parallel.hpp"
#include "seqclt/random.hpp"
#include "seqclt/schedule.hpp"
#include "seqclt/transfer.hpp"

namespace seqclt {

namespace detail {

inline void check_index(const MapSchedule& schedule, std::int64_t i) {
  if (i < 0) throw ConstraintError("time index must be >= 0");
  if (i > schedule.horizon()) throw ConstraintError("time index exceeds schedule horizon");
}

inline Eigen::VectorXd grid_means(const std::vector<std::vector<double>>& f_grid, const std::vector<double>& rho) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(f_grid.size()));
  for (std::size_t a = 0; a < f_grid.size(); ++a) m(static_cast<Eigen::Index>(a)) = integrate(f_grid[a], rho);
  return m;
}

inline std::vector<std::vector<double>> observable_grid(const Observable& f, int m) {
  std::vector<std::vector<double>> out;
  for (int a = 0; a < f.dim(); ++a) out.push_back(f.on_grid(a, m));
  return out;
}

}  // namespace detail

/// Densities rho_0 .. rho_n along a schedule together with the means of f.
class DensityChain {
 public:
  DensityChain(const MapSchedule& schedule, const Observable& f, const GridDensity& rho0, std::int64_t n)
      : f_grid_(detail::observable_grid(f, rho0.size())) {
    detail::check_index(schedule, n);
    rho_.push_back(rho0);
    for (std::int64_t i = 1; i <= n; ++i) rho_.push_back(transfer_apply(schedule.map(i), rho_.back()));
    for (const auto& r : rho_) means_.push_back(detail::grid_means(f_grid_, r.values()));
  }

  const GridDensity& density(std::int64_t i) const { return rho_[static_cast<std::size_t>(i)]; }
  const Eigen::VectorXd& mean(std::int64_t i) const { return means_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& f_grid(int a) const { return f_grid_[static_cast<std::size_t>(a)]; }

  /// (f_a - mean_a(i)) on the grid.
  std::vector<double> centred(int a, std::int64_t i) const {
    std::vector<double> out = f_grid(a);
    const double m = mean(i)(a);
    for (double& v : out) v -= m;
    return out;
  }

 private:
  std::vector<std::vector<double>> f_grid_;
  std::vector<GridDensity> rho_;
  std::vector<Eigen::VectorXd> means_;
};

/// mu(f o T_i) = integral of f against rho_i.
inline Eigen::VectorXd mean_at_time(const MapSchedule& schedule, const Observable& f, const GridDensity& rho0,
                                    std::int64_t i) {
  detail::check_index(schedule, i);
  const GridDensity rho = pushforward_density(schedule, rho0, i);
  return detail::grid_means(detail::observable_grid(f, rho0.size()), rho.values());
}

/// mu(fbar^i_alpha fbar^j_beta) by duality: the signed measure
/// (f_alpha - m_i) rho_i is pushed j - i steps without renormalization and
/// integrated against f_beta - m_j.
inline double pair_correlation(const MapSchedule& schedule, const Observable& f, int alpha, int beta,
                               std::int64_t i, std::int64_t j, const GridDensity& rho0) {
  if (i < 0 || j < i) throw ConstraintError("pair_correlation: need 0 <= i <= j");
  if (alpha < 0 || alpha >= f.dim() || beta < 0 || beta >= f.dim())
    throw ConstraintError("pair_correlation: component index out of range");
  const DensityChain chain(schedule, f, rho0, j);
  std::vector<double> g = chain.centred(alpha, i);
  const auto& rho = chain.density(i).values();
  for (std::size_t x = 0; x < g.size(); ++x) g[x] *= rho[x];
  for (std::int64_t s = i + 1; s <= j; ++s) g = transfer_apply_signed(schedule.map(s), g);
  return integrate(chain.centred(beta, j), g);
}

/// Four-point correlation mu(fbar^i_a fbar^j_b fbar^k_c fbar^l_e) by
/// alternating multiplication and signed pushes.
inline double fourth_correlation(const MapSchedule& schedule, const DensityChain& chain, int a, int b, int c, int e,
                                 std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
  if (!(0 <= i && i <= j && j <= k && k <= l)) throw ConstraintError("fourth_correlation: need i <= j <= k <= l");
  std::vector<double> g = chain.centred(a, i);
  const auto& rho = chain.density(i).values();
  for (std::size_t x = 0; x < g.size(); ++x) g[x] *= rho[x];
  auto advance = [&](std::int64_t from, std::int64_t to) {
    for (std::int64_t s = from + 1; s <= to; ++s) g = transfer_apply_signed(schedule.map(s), g);
  };
  auto multiply = [&](int comp, std::int64_t t) {
    const auto fc = chain.centred(comp, t);
    for (std::size_t x = 0; x < g.size(); ++x) g[x] *= fc[x];
  };
  advance(i, j);
  multiply(b, j);
  advance(j, k);
  multiply(c, k);
  advance(k, l);
  return integrate(chain.centred(e, l), g);
}

/// Means m_i and correlations c(i, i + lag) = mu(fbar^i (x) fbar^{i+lag}) for
/// 0 <= i < count and 0 <= lag <= max_lag (with i + lag < count).
class MomentTable {
 public:
  static MomentTable build(const MapSchedule& schedule, const Observable& f, const GridDensity& rho0,
                           std::int64_t count, int max_lag) {
    if (count < 1) throw ConstraintError("MomentTable: count must be >= 1");
    if (max_lag < 0) throw ConstraintError("MomentTable: negative lag");
    detail::check_index(schedule, count - 1);
    MomentTable t;
    t.d_ = f.dim();
    t.count_ = count;
    t.max_lag_ = static_cast<int>(std::min<std::int64_t>(max_lag, count - 1));
    const int m = rho0.size();
    const auto f_grid = detail::observable_grid(f, m);

    GridDensity rho = rho0;
    t.means_.push_back(detail::grid_means(f_grid, rho.values()));
    for (std::int64_t i = 1; i < count; ++i) {
      rho = transfer_apply(schedule.map(i), rho);
      t.means_.push_back(detail::grid_means(f_grid, rho.values()));
    }

    const auto d = static_cast<std::size_t>(t.d_);
    t.corr_.assign(static_cast<std::size_t>(count) * static_cast<std::size_t>(t.max_lag_ + 1) * d * d, 0.0);
    std::vector<double> g(static_cast<std::size_t>(m));
    std::vector<double> tmp(g.size());
    rho = rho0;
    for (std::int64_t i = 0; i < count; ++i) {
      if (i > 0) rho = transfer_apply(schedule.map(i), rho);
      const std::int64_t lags = std::min<std::int64_t>(t.max_lag_, count - 1 - i);
      for (int a = 0; a < t.d_; ++a) {
        const double ma = t.means_[static_cast<std::size_t>(i)](a);
        for (std::size_t x = 0; x < g.size(); ++x) g[x] = (f_grid[static_cast<std::size_t>(a)][x] - ma) * rho[static_cast<int>(x)];
        for (std::int64_t lag = 0; lag <= lags; ++lag) {
          if (lag > 0) {
            transfer_table(schedule.map(i + lag), m)->apply(g.data(), tmp.data());
            g.swap(tmp);
          }
          const auto& mj = t.means_[static_cast<std::size_t>(i + lag)];
          for (int b = 0; b < t.d_; ++b) {
            const auto& fb = f_grid[static_cast<std::size_t>(b)];
            double s = 0.0;
            for (std::size_t x = 0; x < g.size(); ++x) s += (fb[x] - mj(b)) * g[x];
            t.corr_[t.offset(i, static_cast<int>(lag), a, b)] = s / m;
          }
        }
      }
    }
    return t;
  }

  int dim() const { return d_; }
  std::int64_t count() const { return count_; }
  int max_lag() const { return max_lag_; }
  const Eigen::VectorXd& mean(std::int64_t i) const { return means_[static_cast<std::size_t>(i)]; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }

  /// d x d matrix with entries mu(fbar^i_a fbar^{i+lag}_b).
  Eigen::MatrixXd corr(std::int64_t i, int lag) const {
    if (i < 0 || i >= count_ || lag < 0 || lag > max_lag_ || i + lag >= count_)
      throw ConstraintError("MomentTable::corr: index out of range");
    Eigen::MatrixXd c(d_, d_);
    for (int a = 0; a < d_; ++a)
      for (int b = 0; b < d_; ++b) c(a, b) = corr_[offset(i, lag, a, b)];
    return c;
  }

  /// (1/scale) sum_{i,j, |i-j| <= lag_cutoff} w_i w_j mu(fbar^i (x) fbar^j), symmetrized.
  Eigen::MatrixXd weighted_covariance(const std::vector<double>& w, double scale, int lag_cutoff) const {
    if (static_cast<std::int64_t>(w.size()) > count_) throw ConstraintError("weighted_covariance: too many weights");
    if (!(scale > 0.0)) throw ConstraintError("weighted_covariance: scale must be > 0");
    const int lags = std::min(lag_cutoff, max_lag_);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d_, d_);
    const auto n = static_cast<std::int64_t>(w.size());
    for (std::int64_t i = 0; i < n; ++i) {
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi == 0.0) continue;
      for (int lag = 0; lag <= lags && i + lag < n; ++lag) {
        const double wj = w[static_cast<std::size_t>(i + lag)];
        if (wj == 0.0) continue;
        for (int a = 0; a < d_; ++a) {
          for (int b = 0; b < d_; ++b) {
            const double c = wi * wj * corr_[offset(i, lag, a, b)];
            s(a, b) += c;
            if (lag > 0) s(b, a) += c;
          }
        }
      }
    }
    s /= scale;
    return 0.5 * (s + s.transpose());
  }

  /// Sigma_N = (1/N) sum_{i,j<N} mu(fbar^i (x) fbar^j), |i - j| <= lag_cutoff.
  Eigen::MatrixXd covariance(std::int64_t n, int lag_cutoff) const {
    if (n < 1 || n > count_) throw ConstraintError("MomentTable::covariance: N out of range");
    return weighted_covariance(std::vector<double>(static_cast<std::size_t>(n), 1.0), static_cast<double>(n),
                               lag_cutoff);
  }

  /// max over entries of |c(i, i + lag)| / theta^lag.
  double max_scaled_correlation(double theta) const {
    double best = 0.0;
    for (std::int64_t i = 0; i < count_; ++i) {
      for (int lag = 0; lag <= max_lag_ && i + lag < count_; ++lag) {
        const double scale = std::pow(theta, lag);
        for (int a = 0; a < d_; ++a)
          for (int b = 0; b < d_; ++b) best = std::max(best, std::abs(corr_[offset(i, lag, a, b)]) / scale);
      }
    }
    return best;
  }

 private:
  std::size_t offset(std::int64_t i, int lag, int a, int b) const {
    const auto d = static_cast<std::size_t>(d_);
    return ((static_cast<std::size_t>(i) * static_cast<std::size_t>(max_lag_ + 1) + static_cast<std::size_t>(lag)) * d +
            static_cast<std::size_t>(a)) *
               d +
           static_cast<std::size_t>(b);
  }

  int d_ = 1;
  std::int64_t count_ = 0;
  int max_lag_ = 0;
  std::vector<Eigen::VectorXd> means_;
  std::vector<double> corr_;
};

/// ceil(10 / -log theta): the neglected correlations are below theta^10.
inline int default_lag_cutoff(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConstraintError("default_lag_cutoff: theta must be in (0, 1)");
  return static_cast<int>(std::ceil(10.0 / -std::log(theta)));
}

/// Per-entry bound on the correlations dropped by a lag cutoff L:
/// 2 C2 theta^{L+1} / (1 - theta).
inline double covariance_tail_bound(const DecayConstants& k, int lag_cutoff) {
  return 2.0 * k.C2 * std::pow(k.theta, lag_cutoff + 1) / (1.0 - k.theta);
}

struct CovarianceResult {
  Eigen::MatrixXd sigma;
  double tail_bound = std::numeric_limits<double>::quiet_NaN();  ///< NaN without decay constants
  int lag_cutoff = 0;
  double sigma_sq() const { return sigma(0, 0); }
};

inline CovarianceResult covariance_matrix(const MapSchedule& schedule, const Observable& f, std::int64_t n,
                                          int lag_cutoff, const GridDensity& rho0,
                                          const std::optional<DecayConstants>& constants = std::nullopt) {
  if (lag_cutoff < 1) throw ConstraintError("covariance_matrix: lag_cutoff must be >= 1");
  const auto table = MomentTable::build(schedule, f, rho0, n, lag_cutoff);
  CovarianceResult out;
  out.sigma = table.covariance(n, lag_cutoff);
  out.lag_cutoff = lag_cutoff;
  if (constants) out.tail_bound = covariance_tail_bound(*constants, lag_cutoff);
  return out;
}

/// Monte Carlo draws of a Birkhoff-type sum.
struct WSamples {
  std::int64_t N = 0;
  Eigen::MatrixXd values;  ///< m x d
  std::string fingerprint;
  std::uint64_t seed = 0;

  std::int64_t size() const { return values.rows(); }
  std::vector<double> component(int a) const {
    std::vector<double> out(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index r = 0; r < values.rows(); ++r) out[static_cast<std::size_t>(r)] = values(r, a);
    return out;
  }
};

/// m draws of (1/sqrt(scale)) sum_i w_i (f(T_i x0) - means[i]), x0 ~ initial.
/// Draw r uses the stream (seed, r), so the result is independent of the
/// thread count.
inline Eigen::MatrixXd sample_weighted_sums(const MapSchedule& schedule, const Observable& f,
                                            const std::vector<Eigen::VectorXd>& means, const std::vector<double>& w,
                                            double scale, std::int64_t m, std::uint64_t seed,
                                            const InitialDensity& initial) {
  if (m < 1) throw ConstraintError("sample: m must be >= 1");
  if (means.size() < w.size()) throw ConstraintError("sample: missing centering means");
  const auto n = static_cast<std::int64_t>(w.size());
  const int d = f.dim();
  const std::vector<CircleMap> maps = materialize(schedule, std::max<std::int64_t>(n - 1, 0));
  std::vector<ScalarObservable> comps;
  for (int a = 0; a < d; ++a) comps.push_back(f.component(a));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, d);
  const double norm = 1.0 / std::sqrt(scale);
  // x -> kx mod 1 in binary floating point shifts zeros into the low bits
  // and reaches 0 after ~53 steps. For these exactly linear maps the
  // unresolved low bits are redrawn every step; perturbed maps refill
  // them through the rounding of the sine term.
  constexpr double kLowBitJitter = 0x1.0p-44;
  std::vector<char> linear(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) linear[i] = maps[i].amplitude() == 0.0;
  parallel_for(m, [&](std::int64_t r) {
    Stream rng(seed, static_cast<std::uint64_t>(r));
    double x = sample_initial(initial, rng);
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
      if (i > 0) {
        const auto s = static_cast<std::size_t>(i - 1);
        x = maps[s](x);
        if (linear[s]) x = wrap_unit(x + kLowBitJitter * rng.uniform());
      }
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi != 0.0) {
        const auto& mi = means[static_cast<std::size_t>(i)];
        for (int a = 0; a < d; ++a) acc[static_cast<std::size_t>(a)] += wi * (comps[static_cast<std::size_t>(a)](x) - mi(a));
      }
    }
    for (int a = 0; a < d; ++a) out(r, a) = norm * acc[static_cast<std::size_t>(a)];
  });
  return out;
}

/// W(N) = (1/sqrt(N)) sum_{i<N} fbar^i with centering means supplied.
inline WSamples sample_W(const MapSchedule& schedule, const Observable& f, std::int64_t n, std::int64_t m,
                         std::uint64_t seed, const InitialDensity& initial, const std::vector<Eigen::VectorXd>& means) {
  if (n < 1) throw ConstraintError("sample_W: N must be >= 1");
  WSamples s;
  s.N = n;
  s.seed = seed;
  s.fingerprint = schedule.fingerprint();
  s.values = sample_weighted_sums(schedule, f, means, std::vector<double>(static_cast<std::size_t>(n), 1.0),
                                  static_cast<double>(n), m, seed, initial);
  return s;
}

/// As above, computing the centering means on an M-point grid.
inline WSamples sample_W(const MapSchedule& schedule, const Observable& f, std::int64_t n, std::int64_t m,
                         std::uint64_t seed, const InitialDensity& initial = InitialDensity(),
                         int grid = kDefaultGridSize) {
  if (n < 1) throw ConstraintError("sample_W: N must be >= 1");
  const DensityChain chain(schedule, f, GridDensity::from_initial(initial, grid), n - 1);
  std::vector<Eigen::VectorXd> means;
  for (std::int64_t i = 0; i < n; ++i) means.push_back(chain.mean(i));
  return sample_W(schedule, f, n, m, seed, initial, means);
}

/// Weights of xi_n(t): 1 for i < floor(nt), {nt} at i = floor(nt).
inline std::vector<double> xi_weights(std::int64_t n, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConstraintError("xi: t must be in [0, 1]");
  if (n < 1) throw ConstraintError("xi: n must be >= 1");
  const double nt = static_cast<double>(n) * t;
  const auto whole = static_cast<std::int64_t>(std::floor(nt));
  const double frac = nt - static_cast<double>(whole);
  std::vector<double> w(static_cast<std::size_t>(whole), 1.0);
  if (frac > 0.0) w.push_back(frac);
  return w;
}

struct XiSamples {
  std::int64_t n = 0;
  double t = 0.0;
  Eigen::MatrixXd values;  ///< m x d
};

/// m draws of xi_n(t) along row n of the quasistatic array.
inline XiSamples xi_sample(std::shared_ptr<const QuasistaticCurve> curve, const Observable& f, std::int64_t n,
                           double t, std::int64_t m, std::uint64_t seed, const InitialDensity& initial = InitialDensity(),
                           int grid = kDefaultGridSize) {
  const auto w = xi_weights(n, t);
  const MapSchedule row = MapSchedule::quasistatic(std::move(curve), n);
  XiSamples out;
  out.n = n;
  out.t = t;
  if (w.empty()) {
    out.values = Eigen::MatrixXd::Zero(m, f.dim());
    return out;
  }
  const DensityChain chain(row, f, GridDensity::from_initial(initial, grid), static_cast<std::int64_t>(w.size()) - 1);
  std::vector<Eigen::VectorXd> means;
  for (std::size_t i = 0; i < w.size(); ++i) means.push_back(chain.mean(static_cast<std::int64_t>(i)));
  out.values = sample_weighted_sums(row, f, means, w, static_cast<double>(n), m, seed, initial);
  return out;
}

/// Exact Var xi_n(t) (matrix) from the moment table of row n, including the
/// fractional-weight terms.
inline Eigen::MatrixXd xi_covariance(const MomentTable& row_table, std::int64_t n, double t, int lag_cutoff) {
  const auto w = xi_weights(n, t);
  if (w.empty()) return Eigen::MatrixXd::Zero(row_table.dim(), row_table.dim());
  return row_table.weighted_covariance(w, static_cast<double>(n), lag_cutoff);
}

struct SigmaHat {
  Eigen::MatrixXd value;      ///< sigma_hat^2 (1 x 1) or Sigma_hat (d x d)
  int lags = 0;               ///< series terms k >= 1 used
  double tail_estimate = 0.0; ///< geometric extrapolation of the dropped terms
  double scalar() const { return value(0, 0); }
};

struct SigmaHatOptions {
  double tol = 1e-12;
  int lag_max = 200;
  int grid = kDefaultGridSize;
  double density_tol = 1e-14;
};

/// Asymptotic covariance of the autonomous system driven by `map`:
/// muhat(fhat (x) fhat) + sum_{k>=1} (c_k + c_k^T), c_k = m[fhat_b L^k(rhohat fhat_a)].
inline SigmaHat sigma_hat_matrix(const CircleMap& map, const Observable& f, const SigmaHatOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ConstraintError("sigma_hat_sq: tol must be > 0");
  const int m = opt.grid;
  const auto rho = invariant_density(map, opt.density_tol, m).values();
  const auto table = transfer_table(map, m);
  const int d = f.dim();
  std::vector<std::vector<double>> fhat = detail::observable_grid(f, m);
  for (auto& fa : fhat) {
    const double mean = integrate(fa, rho);
    for (double& v : fa) v -= mean;
  }
  std::vector<std::vector<double>> g(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    g[static_cast<std::size_t>(a)] = fhat[static_cast<std::size_t>(a)];
    for (std::size_t x = 0; x < rho.size(); ++x) g[static_cast<std::size_t>(a)][x] *= rho[x];
  }
  auto correlations = [&]() {
    Eigen::MatrixXd c(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) c(a, b) = integrate(fhat[static_cast<std::size_t>(b)], g[static_cast<std::size_t>(a)]);
    return c;
  };
  SigmaHat out;
  out.value = correlations();
  std::vector<double> tmp(rho.size());
  double first = std::numeric_limits<double>::quiet_NaN();
  double last = 0.0;
  for (int k = 1; k <= opt.lag_max; ++k) {
    for (auto& ga : g) {
      table->apply(ga.data(), tmp.data());
      ga.swap(tmp);
    }
    const Eigen::MatrixXd c = correlations();
    out.value += c + c.transpose();
    out.lags = k;
    last = c.cwiseAbs().maxCoeff();
    if (k == 1) first = last;
    if (last < opt.tol) {
      double r = 0.0;
      if (k >= 2 && first > 0.0 && last > 0.0) r = std::pow(last / first, 1.0 / (k - 1));
      r = std::min(r, 0.99);
      out.tail_estimate = 2.0 * last * r / (1.0 - r);
      out.value = 0.5 * (out.value + out.value.transpose());
      return out;
    }
  }
  std::ostringstream os;
  os << "sigma_hat_sq: correlation series not below tol = " << opt.tol << " after " << opt.lag_max
     << " lags (first term " << first << ", last term " << last << ")";
  throw NumericalError(os.str());
}

inline double sigma_hat_sq(const CircleMap& map, const Observable& f, const SigmaHatOptions& opt = {}) {
  if (f.dim() != 1) throw ConstraintError("sigma_hat_sq: univariate observable required; use sigma_hat_matrix");
  return sigma_hat_matrix(map, f, opt).scalar();
}

/// sigma_hat^2_t (or Sigma_hat_t) sampled on a t-grid.
struct VarianceCurve {
  std::vector<double> t;
  std::vector<Eigen::MatrixXd> values;
  std::vector<int> lags;
  std::vector<double> tail;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path);
    out << "t,value,lags,tail_bound\n";
    char buf[128];
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g\n", t[i], values[i](0, 0), lags[i], tail[i]);
      out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
  }
};

inline VarianceCurve sigma_hat_curve(const QuasistaticCurve& curve, const Observable& f, const std::vector<double>& ts,
                                     const SigmaHatOptions& opt = {}) {
  VarianceCurve vc;
  vc.t = ts;
  vc.values.resize(ts.size());
  vc.lags.resize(ts.size());
  vc.tail.resize(ts.size());
  parallel_for(static_cast<std::int64_t>(ts.size()), [&](std::int64_t i) {
    const auto s = sigma_hat_matrix(curve.at(ts[static_cast<std::size_t>(i)]), f, opt);
    vc.values[static_cast<std::size_t>(i)] = s.value;
    vc.lags[static_cast<std::size_t>(i)] = s.lags;
    vc.tail[static_cast<std::size_t>(i)] = s.tail_estimate;
  });
  return vc;
}

struct CurveIntegral {
  Eigen::MatrixXd value;    ///< sigma_t^2 (1 x 1) or Sigma_t
  double refinement_error;  ///< |S_h - S_2h| / 15, max entry
  int nodes;
  double scalar() const { return value(0, 0); }
};

/// Composite Simpson rule for int_0^t sigma_hat_s^2 ds. The node count is
/// rounded up to 4k + 1 so that the half-resolution rule reuses the nodes.
inline CurveIntegral sigma_sq_curve(const QuasistaticCurve& curve, const Observable& f, double t, int quad_points = 33,
                                    const SigmaHatOptions& opt = {}) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConstraintError("sigma_sq_curve: t must be in [0, 1]");
  if (quad_points < 2) throw ConstraintError("sigma_sq_curve: quad_points must be >= 2");
  const int d = f.dim();
  if (t == 0.0) return {Eigen::MatrixXd::Zero(d, d), 0.0, 0};
  int q = std::max(quad_points, 5);
  while ((q - 1) % 4 != 0) ++q;
  std::vector<double> nodes(static_cast<std::size_t>(q));
  for (int j = 0; j < q; ++j) nodes[static_cast<std::size_t>(j)] = t * j / (q - 1);
  const auto vc = sigma_hat_curve(curve, f, nodes, opt);
  auto simpson = [&](int stride) {
    const int cells = (q - 1) / stride;
    const double h = t / cells;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    for (int c = 0; c <= cells; ++c) {
      const double wt = (c == 0 || c == cells) ? 1.0 : (c % 2 == 1 ? 4.0 : 2.0);
      s += wt * vc.values[static_cast<std::size_t>(c * stride)];
    }
    return Eigen::MatrixXd(s * h / 3.0);
  };
  const Eigen::MatrixXd fine = simpson(1);
  const Eigen::MatrixXd coarse = simpson(2);
  return {fine, (fine - coarse).cwiseAbs().maxCoeff() / 15.0, q};
}

struct NormalizedSamples {
  std::vector<double> values;
  bool degenerate = false;
};

/// S_N / s_N = sqrt(N) W / s_N; s_N = 0 gives the zero sample set, flagged.
inline NormalizedSamples self_normalize(const WSamples& samples, double s_n, int component = 0) {
  if (s_n < 0.0) throw ConstraintError("self_normalize: s_N must be >= 0");
  NormalizedSamples out;
  out.values.assign(static_cast<std::size_t>(samples.size()), 0.0);
  if (s_n == 0.0) {
    out.degenerate = true;
    return out;
  }
  const double scale = std::sqrt(static_cast<double>(samples.N)) / s_n;
  for (Eigen::Index r = 0; r < samples.values.rows(); ++r)
    out.values[static_cast<std::size_t>(r)] = samples.values(r, component) * scale;
  return out;
}

}  // namespace seqclt
