#pragma once

// Configuration-driven studies: sequential rate studies, quasistatic
// variance/distance studies and random-environment studies.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

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

#include "seqclt/bounds.hpp"
#include "seqclt/calibration.hpp"
#include "seqclt/circle_map.hpp"
#include "seqclt/constants.hpp"
#include "seqclt/distances.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"
#include "seqclt/initial_density.hpp"
#include "seqclt/observable.hpp"
#include "seqclt/random.hpp"
#include "seqclt/report.hpp"
#include "seqclt/schedule.hpp"
#include "seqclt/statistics.hpp"
#include "seqclt/transfer.hpp"

namespace seqclt {

/// Bumped whenever a study's column set or meaning changes.
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
  double beta = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
};

/// Least squares of log d on log N; with the log correction the model is
/// d = c N^beta log N, fitted as log d - log log N on log N.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points, bool with_log_correction) {
  if (points.size() < 3) throw ConstraintError("fit_rate: need at least 3 points");
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [n, d] : points) {
    if (!(d > 0.0)) throw ConstraintError("fit_rate: distances must be > 0");
    if (!(n > 1.0)) throw ConstraintError("fit_rate: N must be > 1");
    x.push_back(std::log(n));
    y.push_back(std::log(d) - (with_log_correction ? std::log(std::log(n)) : 0.0));
  }
  const auto k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConstraintError("fit_rate: N values must not all coincide");
  RateFit fit;
  fit.beta = sxy / sxx;
  fit.intercept = my - fit.beta * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.beta * x[i];
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.stderr_ = std::sqrt(sse / (k - 2.0) / sxx);
  return fit;
}

// ---------------------------------------------------------------------------
// Configuration

struct StudyConfig {
  enum class Scenario { Sequential, Quasistatic, Random };

  Scenario scenario = Scenario::Sequential;
  std::vector<CircleMap> maps;  ///< sequential: the (cyclic) map list
  bool cycle = true;
  std::shared_ptr<const QuasistaticCurve> curve;
  std::shared_ptr<const RandomDriver> driver;
  int realizations = 8;
  std::vector<std::string> observable{"cos1"};
  double initial_epsilon = 0.0;
  std::vector<std::int64_t> n_grid;
  std::vector<double> t_grid{1.0};
  std::int64_t samples = 100000;
  int grid = kDefaultGridSize;
  std::uint64_t seed = 1;
  std::optional<DecayConstants> constants;  ///< nullopt: calibrate
  std::optional<int> lag_cutoff;
  int quad_points = 33;
  int bootstrap = 32;
  std::vector<TrigTestFunction> test_functions;

  static std::vector<std::int64_t> powers_of_two(int lo, int hi) {
    std::vector<std::int64_t> out;
    for (int e = lo; e <= hi; ++e) out.push_back(std::int64_t{1} << e);
    return out;
  }

  Observable make_observable() const { return Observable::parse(observable); }
  InitialDensity make_initial() const { return InitialDensity(initial_epsilon); }

  MapSchedule make_sequential_schedule() const { return MapSchedule::explicit_list(maps, cycle); }

  void validate() const {
    if (n_grid.empty()) throw ConfigError("config: empty N-grid");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] < 2) throw ConfigError("config: N-grid entries must be >= 2");
      if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ConfigError("config: N-grid must be strictly increasing");
    }
    const bool needs_samples = scenario != Scenario::Quasistatic;
    if (samples < 0 || (needs_samples && samples < 1000) || (samples > 0 && samples < 1000))
      throw ConfigError("config: distance studies need samples >= 1000");
    if (grid < 2 || (grid & (grid - 1)) != 0) throw ConfigError("config: grid must be a power of two");
    if (bootstrap < 2) throw ConfigError("config: bootstrap must be >= 2");
    if (scenario == Scenario::Sequential) {
      if (maps.empty()) throw ConfigError("config: sequential scenario needs schedule.maps");
      if (!cycle && static_cast<std::size_t>(n_grid.back()) > maps.size())
        throw ConfigError("config: non-cyclic map list shorter than the largest N");
    }
    if (scenario == Scenario::Quasistatic) {
      if (!curve) throw ConfigError("config: quasistatic scenario needs a curve");
      if (t_grid.empty()) throw ConfigError("config: empty t-grid");
      for (const double t : t_grid)
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("config: t-grid must lie in [0, 1]");
    }
    if (scenario == Scenario::Random) {
      if (!driver) throw ConfigError("config: random scenario needs a driver");
      if (realizations < 2) throw ConfigError("config: random scenario needs realizations >= 2");
    }
    if (constants) constants->validate();
    if (lag_cutoff && *lag_cutoff < 1) throw ConfigError("config: lag_cutoff must be >= 1");
    for (const auto& h : test_functions)
      if (h.v.size() != static_cast<Eigen::Index>(observable.size()))
        throw ConfigError("config: test function dimension differs from the observable");
  }

  static CircleMap map_from_json(const nlohmann::json& j) {
    return CircleMap(j.at("degree").get<int>(), j.at("amplitude").get<double>(), j.value("phase", 0.0));
  }

  static std::shared_ptr<const QuasistaticCurve> curve_from_json(const nlohmann::json& j) {
    const auto type = j.value("type", std::string("holder_cusp"));
    if (type == "constant") return std::make_shared<const QuasistaticCurve>(QuasistaticCurve::constant(map_from_json(j.at("map"))));
    if (type == "holder_cusp") {
      return std::make_shared<const QuasistaticCurve>(QuasistaticCurve::holder_cusp(
          j.at("degree").get<int>(), j.at("base").get<double>(), j.at("cusp").get<double>(), j.value("at", 0.5),
          j.at("eta").get<double>(), j.value("phase0", 0.0), j.value("phase_slope", 0.0)));
    }
    throw ConfigError("config: unknown curve type '" + type + "'");
  }

  static std::shared_ptr<const RandomDriver> driver_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
      if (j.get<std::string>() == "default") return std::make_shared<const RandomDriver>(RandomDriver::default_markov());
      throw ConfigError("config: unknown driver '" + j.get<std::string>() + "'");
    }
    std::vector<CircleMap> states;
    for (const auto& s : j.at("states")) states.push_back(map_from_json(s));
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "iid") {
      auto p = j.contains("probabilities") ? j.at("probabilities").get<std::vector<double>>()
                                           : std::vector<double>(states.size(), 1.0);
      return std::make_shared<const RandomDriver>(RandomDriver::iid(std::move(states), std::move(p)));
    }
    if (kind == "markov") {
      const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw ConfigError("config: transition matrix must be square");
        for (std::size_t c = 0; c < rows.size(); ++c)
          p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      return std::make_shared<const RandomDriver>(RandomDriver::markov(
          std::move(states), p, j.value("gamma", std::numeric_limits<double>::infinity())));
    }
    throw ConfigError("config: unknown driver kind '" + kind + "'");
  }

  static StudyConfig from_json(const nlohmann::json& j) {
    StudyConfig c;
    try {
      const auto scenario = j.at("scenario").get<std::string>();
      if (scenario == "sequential") {
        c.scenario = Scenario::Sequential;
      } else if (scenario == "quasistatic") {
        c.scenario = Scenario::Quasistatic;
      } else if (scenario == "random") {
        c.scenario = Scenario::Random;
      } else {
        throw ConfigError("config: unknown scenario '" + scenario + "'");
      }
      if (j.contains("schedule")) {
        for (const auto& m : j.at("schedule").at("maps")) c.maps.push_back(map_from_json(m));
        c.cycle = j.at("schedule").value("cycle", true);
      }
      if (j.contains("curve")) c.curve = curve_from_json(j.at("curve"));
      if (j.contains("driver")) c.driver = driver_from_json(j.at("driver"));
      c.realizations = j.value("realizations", c.realizations);
      if (j.contains("observable")) {
        const auto& o = j.at("observable");
        c.observable = o.is_string() ? std::vector<std::string>{o.get<std::string>()} : o.get<std::vector<std::string>>();
      }
      c.initial_epsilon = j.value("initial_epsilon", 0.0);
      if (j.contains("N_grid")) {
        c.n_grid = j.at("N_grid").get<std::vector<std::int64_t>>();
      } else if (j.contains("n_grid")) {
        c.n_grid = j.at("n_grid").get<std::vector<std::int64_t>>();
      } else {
        c.n_grid = powers_of_two(6, 12);
      }
      if (j.contains("t_grid")) c.t_grid = j.at("t_grid").get<std::vector<double>>();
      c.samples = j.value("samples", c.samples);
      c.grid = j.value("grid", c.grid);
      c.seed = j.value("seed", c.seed);
      if (j.contains("constants")) {
        const auto& k = j.at("constants");
        if (!(k.is_string() && k.get<std::string>() == "calibrate")) {
          DecayConstants dc;
          dc.theta = k.at("theta").get<double>();
          dc.C2 = k.at("C2").get<double>();
          dc.C4 = k.at("C4").get<double>();
          dc.B0 = k.at("B0").get<double>();
          dc.D0 = k.value("D0", dc.B0);
          dc.L0 = k.value("L0", 0.0);
          dc.source = DecayConstants::Source::Configured;
          c.constants = dc;
        }
      }
      if (j.contains("lag_cutoff") && !j.at("lag_cutoff").is_null()) c.lag_cutoff = j.at("lag_cutoff").get<int>();
      c.quad_points = j.value("quad_points", c.quad_points);
      c.bootstrap = j.value("bootstrap", c.bootstrap);
      if (j.contains("test_functions")) {
        for (const auto& h : j.at("test_functions")) {
          const auto v = h.at("v").get<std::vector<double>>();
          TrigTestFunction t;
          t.v = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
          t.c = h.value("c", 0.0);
          c.test_functions.push_back(std::move(t));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const ConstraintError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static StudyConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
    return from_json(j);
  }
};

// ---------------------------------------------------------------------------
// Shared Monte Carlo helpers

struct DistanceEstimate {
  double distance = 0.0;
  double mc_error = 0.0;     ///< bootstrap standard deviation of the estimate
  double noise_floor = 0.0;  ///< mean W1 of m exact N(0, sigma^2) draws against N(0, sigma^2)
};

/// W1 against N(0, sigma^2) with a deterministic bootstrap error bar.
inline DistanceEstimate w1_with_error(const std::vector<double>& samples, double sigma, std::uint64_t seed,
                                      int bootstrap) {
  DistanceEstimate e;
  e.distance = w1_empirical_vs_normal(samples, sigma);
  const auto m = samples.size();
  std::vector<double> boot(static_cast<std::size_t>(bootstrap));
  parallel_for(bootstrap, [&](std::int64_t b) {
    Stream rng(derive_seed(seed, 0xB0075u), static_cast<std::uint64_t>(b));
    std::vector<double> resample(m);
    for (auto& x : resample) x = samples[rng.below(static_cast<std::uint32_t>(m))];
    boot[static_cast<std::size_t>(b)] = w1_empirical_vs_normal(std::move(resample), sigma);
  });
  double mean = 0.0;
  for (const double v : boot) mean += v;
  mean /= bootstrap;
  double var = 0.0;
  for (const double v : boot) var += (v - mean) * (v - mean);
  e.mc_error = std::sqrt(var / (bootstrap - 1));
  if (sigma > 0.0) {
    constexpr int kFloorReps = 4;
    std::vector<double> floors(kFloorReps);
    parallel_for(kFloorReps, [&](std::int64_t r) {
      Stream rng(derive_seed(seed, 0xF1002u), static_cast<std::uint64_t>(r));
      std::vector<double> g(m);
      for (auto& x : g) x = sigma * rng.normal();
      floors[static_cast<std::size_t>(r)] = w1_empirical_vs_normal(std::move(g), sigma);
    });
    for (const double v : floors) e.noise_floor += v / kFloorReps;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Sequential rate study

struct RateRow {
  std::int64_t N = 0;
  double sigma_sq = 0.0;
  DistanceEstimate w1;
  double bound_variance = 0.0;       ///< C~ max{1, C0^-2} N^{-1/2} log N with C0 = sigma_N
  double bound_variance_free = 0.0;  ///< max{C~, 2} N^{-1/6} log N
  double bound = 0.0;                ///< emitted bound (fallback applied)
  double bound_min = 0.0;            ///< min of the two paths
  double bound_exact_K = 0.0;        ///< finite-N bound with the chosen K (NaN if K >= N)
  std::int64_t K = 0;
  bool K_valid = false;
  bool fallback = false;  ///< sigma_N < N^{-1/6}: variance-free bound emitted
  bool degenerate = false;
  double tail_bound = 0.0;  ///< neglected-lag bound on Sigma_N
};

struct RateReport {
  std::vector<RateRow> rows;
  RateFit fit;
  RateFit fit_log;
  bool fit_rejected = false;
  DecayConstants constants;
  double theta_raw = std::numeric_limits<double>::quiet_NaN();
  bool theta_floored = false;
  double theta_fit_r2 = std::numeric_limits<double>::quiet_NaN();
  double c_tilde = 0.0;
  int lag_cutoff = 0;
  std::string fingerprint;
  std::string observable;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;

  Report to_report() const {
    Report r;
    r.kind = "rate-study";
    r.columns = {"N",          "sigma_sq",       "distance",      "mc_error",           "noise_floor",
                 "bound",      "bound_variance", "bound_variance_free", "bound_min", "bound_exact_K",
                 "K",          "K_valid",        "fallback",      "degenerate",         "tail_bound"};
    for (const auto& row : rows) {
      r.rows.push_back({static_cast<double>(row.N), row.sigma_sq, row.w1.distance, row.w1.mc_error,
                        row.w1.noise_floor, row.bound, row.bound_variance, row.bound_variance_free, row.bound_min,
                        row.bound_exact_K, static_cast<double>(row.K), row.K_valid ? 1.0 : 0.0,
                        row.fallback ? 1.0 : 0.0, row.degenerate ? 1.0 : 0.0, row.tail_bound});
    }
    r.summary = {{"beta", fit.beta},
                 {"beta_stderr", fit.stderr_},
                 {"r2", fit.r2},
                 {"beta_log", fit_log.beta},
                 {"beta_log_stderr", fit_log.stderr_},
                 {"r2_log", fit_log.r2},
                 {"fit_rejected", fit_rejected ? 1.0 : 0.0},
                 {"theta", constants.theta},
                 {"theta_raw", theta_raw},
                 {"theta_floored", theta_floored ? 1.0 : 0.0},
                 {"theta_fit_r2", theta_fit_r2},
                 {"C2", constants.C2},
                 {"C4", constants.C4},
                 {"B0", constants.B0},
                 {"D0", constants.D0},
                 {"L0", constants.L0},
                 {"C_tilde", c_tilde},
                 {"lag_cutoff", static_cast<double>(lag_cutoff)},
                 {"samples", static_cast<double>(samples)},
                 {"seed", static_cast<double>(seed)}};
    r.tags = {{"schedule", fingerprint},
              {"observable", observable},
              {"constants_source", constants.source_name()},
              {"schema", std::to_string(kReportSchemaVersion)}};
    return r;
  }
};

inline RateReport run_rate_study(const StudyConfig& config) {
  if (config.scenario != StudyConfig::Scenario::Sequential) throw ConfigError("rate-study: sequential scenario required");
  config.validate();
  const MapSchedule schedule = config.make_sequential_schedule();
  const Observable f = config.make_observable();
  if (f.dim() != 1) throw ConfigError("rate-study: univariate observable required");
  const InitialDensity initial = config.make_initial();
  const GridDensity rho0 = GridDensity::from_initial(initial, config.grid);
  const std::int64_t n_max = config.n_grid.back();

  RateReport rep;
  rep.fingerprint = schedule.fingerprint();
  rep.observable = f.description();
  rep.seed = config.seed;
  rep.samples = config.samples;

  std::optional<Calibration> cal;
  double theta_for_lag = 0.0;
  if (config.constants) {
    rep.constants = *config.constants;
    rep.constants.validate_for(schedule.lambda_min());
    theta_for_lag = rep.constants.theta;
  } else {
    CalibrationOptions copt;
    copt.theta.grid = config.grid;
    cal = calibrate_theta(schedule, initial, copt);
    theta_for_lag = cal->constants.theta;
  }
  rep.lag_cutoff = config.lag_cutoff.value_or(default_lag_cutoff(theta_for_lag));
  const MomentTable table = MomentTable::build(schedule, f, rho0, n_max, rep.lag_cutoff);
  if (cal) {
    rep.constants = calibrate(schedule, f, initial, table, config.grid).constants;
    rep.theta_raw = cal->theta_raw;
    rep.theta_floored = cal->theta_floored;
    rep.theta_fit_r2 = cal->theta_estimate.min_r2;
  }
  const DecayConstants& k = rep.constants;
  rep.c_tilde = circle_C_tilde(k, f.sup(), f.norm_lip());

  rep.rows.resize(config.n_grid.size());
  for (std::size_t idx = 0; idx < config.n_grid.size(); ++idx) {
    const std::int64_t n = config.n_grid[idx];
    RateRow& row = rep.rows[idx];
    row.N = n;
    row.sigma_sq = table.covariance(n, rep.lag_cutoff)(0, 0);
    const double sigma = std::sqrt(std::max(row.sigma_sq, 0.0));
    row.degenerate = sigma < 1e-6;
    row.tail_bound = covariance_tail_bound(k, rep.lag_cutoff);
    const std::uint64_t row_seed = derive_seed(config.seed, static_cast<std::uint64_t>(n));
    const WSamples w = sample_W(schedule, f, n, config.samples, row_seed, initial, table.means());
    row.w1 = w1_with_error(w.component(0), row.degenerate ? 0.0 : sigma, row_seed, config.bootstrap);

    const KChoice kc = choose_K(n, k.theta);
    row.K = kc.K;
    row.K_valid = kc.valid;
    row.bound_variance_free = circle_variance_free_bound(rep.c_tilde, n, k.theta).value;
    if (row.degenerate) {
      row.bound_variance = std::numeric_limits<double>::infinity();
      row.bound_exact_K = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.bound_variance = circle_wasserstein_bound(rep.c_tilde, sigma, 0.0, n, k.theta).value;
      if (kc.K < n) {
        const CSharp cs = c_sharp(sigma, k.C2, k.C4, f.sup(), k.theta);
        row.bound_exact_K =
            thm_wasserstein_bound(cs, n, kc.K, k.theta, rho_tilde_univar(kc.K, k.theta, k.B0, f.norm_lip())).value;
      } else {
        row.bound_exact_K = std::numeric_limits<double>::quiet_NaN();
      }
    }
    row.fallback = sigma < std::pow(static_cast<double>(n), -1.0 / 6.0);
    row.bound = row.fallback ? row.bound_variance_free : row.bound_variance;
    row.bound_min = std::min(row.bound_variance, row.bound_variance_free);
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto& row : rep.rows)
    if (!row.degenerate && row.w1.distance > 0.0) pts.emplace_back(static_cast<double>(row.N), row.w1.distance);
  if (pts.size() >= 3) {
    rep.fit = fit_rate(pts, false);
    rep.fit_log = fit_rate(pts, true);
  } else {
    rep.fit_rejected = true;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Quasistatic study

struct QdsRow {
  std::int64_t n = 0;
  double t = 0.0;
  double sigma_sq_nt = 0.0;  ///< exact Var xi_n(t) (entry (0,0) for d > 1)
  double sigma_sq_t = 0.0;   ///< int_0^t sigma_hat_s^2 ds
  double gap = 0.0;          ///< max entry of |Sigma_{n,t} - Sigma_t|
  double quad_error = 0.0;
  DistanceEstimate w1;       ///< d = 1: W1(xi_n(t), sigma_t Z); NaN without samples
  double min_eig = 0.0;      ///< smallest eigenvalue of Sigma_{n,t}
  double smooth_gap = std::numeric_limits<double>::quiet_NaN();
  double smooth_stderr = std::numeric_limits<double>::quiet_NaN();
};

struct QdsReport {
  std::vector<QdsRow> rows;
  std::vector<double> t_grid;
  std::vector<RateFit> gap_fit;       ///< per t, slope of the variance gap in n
  std::vector<RateFit> distance_fit;  ///< per t, slope of the distance in n
  bool variance_free = false;         ///< sigma_hat vanishes on the whole t-grid
  int lag_cutoff = 0;
  int quad_nodes = 0;
  double eta = 0.0;
  std::string curve;
  std::string observable;
  std::uint64_t seed = 0;

  Report to_report() const {
    Report r;
    r.kind = "qds-study";
    r.columns = {"n",        "t",        "sigma_sq_nt",   "sigma_sq_t",    "gap",         "quad_error",
                 "distance", "mc_error", "noise_floor",   "min_eig",       "smooth_gap",  "smooth_stderr"};
    for (const auto& row : rows) {
      r.rows.push_back({static_cast<double>(row.n), row.t, row.sigma_sq_nt, row.sigma_sq_t, row.gap,
                        row.quad_error, row.w1.distance, row.w1.mc_error, row.w1.noise_floor, row.min_eig,
                        row.smooth_gap, row.smooth_stderr});
    }
    char key[64];
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      std::snprintf(key, sizeof key, "gap_slope[t=%g]", t_grid[i]);
      r.summary[key] = gap_fit[i].beta;
      std::snprintf(key, sizeof key, "gap_slope_r2[t=%g]", t_grid[i]);
      r.summary[key] = gap_fit[i].r2;
      std::snprintf(key, sizeof key, "distance_slope[t=%g]", t_grid[i]);
      r.summary[key] = distance_fit[i].beta;
    }
    r.summary["variance_free"] = variance_free ? 1.0 : 0.0;
    r.summary["lag_cutoff"] = lag_cutoff;
    r.summary["quad_nodes"] = quad_nodes;
    r.summary["eta"] = eta;
    r.summary["seed"] = static_cast<double>(seed);
    r.tags = {{"curve", curve}, {"observable", observable}, {"schema", std::to_string(kReportSchemaVersion)}};
    return r;
  }
};

namespace detail {

inline RateFit try_fit(const std::vector<std::pair<double, double>>& pts, bool log_correction) {
  std::vector<std::pair<double, double>> positive;
  for (const auto& p : pts)
    if (p.second > 0.0 && std::isfinite(p.second)) positive.push_back(p);
  if (positive.size() < 3) return {};
  return fit_rate(positive, log_correction);
}

}  // namespace detail

inline QdsReport run_qds_study(const StudyConfig& config) {
  if (config.scenario != StudyConfig::Scenario::Quasistatic) throw ConfigError("qds-study: quasistatic scenario required");
  config.validate();
  const Observable f = config.make_observable();
  const int d = f.dim();
  const InitialDensity initial = config.make_initial();
  const GridDensity rho0 = GridDensity::from_initial(initial, config.grid);
  const auto& curve = config.curve;

  QdsReport rep;
  rep.t_grid = config.t_grid;
  rep.eta = curve->eta();
  rep.curve = curve->description();
  rep.observable = f.description();
  rep.seed = config.seed;

  // Lag cutoff from the slowest contraction along the largest row.
  const std::int64_t n_max = config.n_grid.back();
  if (config.lag_cutoff) {
    rep.lag_cutoff = *config.lag_cutoff;
  } else {
    const MapSchedule row = MapSchedule::quasistatic(curve, n_max);
    CalibrationOptions copt;
    copt.theta.grid = config.grid;
    copt.theta.steps = static_cast<int>(std::min<std::int64_t>(30, n_max - 1));
    copt.theta.start_times = {0, n_max / 2, n_max - copt.theta.steps - 1};
    rep.lag_cutoff = default_lag_cutoff(calibrate_theta(row, initial, copt).constants.theta);
  }

  SigmaHatOptions sopt;
  sopt.grid = config.grid;
  std::vector<CurveIntegral> targets;
  bool any_variance = false;
  for (const double t : config.t_grid) {
    targets.push_back(sigma_sq_curve(*curve, f, t, config.quad_points, sopt));
    rep.quad_nodes = std::max(rep.quad_nodes, targets.back().nodes);
    const auto hat = sigma_hat_matrix(curve->at(t), f, sopt);
    if (hat.value.cwiseAbs().maxCoeff() > 1e-12) any_variance = true;
  }
  rep.variance_free = !any_variance;

  for (const std::int64_t n : config.n_grid) {
    const MapSchedule row = MapSchedule::quasistatic(curve, n);
    const MomentTable table = MomentTable::build(row, f, rho0, n + 1, rep.lag_cutoff);
    for (std::size_t ti = 0; ti < config.t_grid.size(); ++ti) {
      const double t = config.t_grid[ti];
      QdsRow r;
      r.n = n;
      r.t = t;
      const Eigen::MatrixXd snt = xi_covariance(table, n, t, rep.lag_cutoff);
      const Eigen::MatrixXd& st = targets[ti].value;
      r.sigma_sq_nt = snt(0, 0);
      r.sigma_sq_t = st(0, 0);
      r.gap = (snt - st).cwiseAbs().maxCoeff();
      r.quad_error = targets[ti].refinement_error;
      r.min_eig = d == 1 ? snt(0, 0) : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(snt).eigenvalues().minCoeff();
      r.w1.distance = std::numeric_limits<double>::quiet_NaN();
      r.w1.mc_error = std::numeric_limits<double>::quiet_NaN();
      r.w1.noise_floor = std::numeric_limits<double>::quiet_NaN();
      if (config.samples > 0) {
        const std::uint64_t seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(n)), ti);
        const auto w = xi_weights(n, t);
        Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(config.samples, d);
        if (!w.empty())
          xi = sample_weighted_sums(row, f, table.means(), w, static_cast<double>(n), config.samples, seed, initial);
        if (d == 1 || rep.variance_free) {
          std::vector<double> c0(static_cast<std::size_t>(xi.rows()));
          for (Eigen::Index i = 0; i < xi.rows(); ++i) c0[static_cast<std::size_t>(i)] = xi(i, 0);
          const double sigma_t = rep.variance_free ? 0.0 : std::sqrt(std::max(st(0, 0), 0.0));
          r.w1 = w1_with_error(c0, sigma_t, seed, config.bootstrap);
        }
        if (d > 1 && !config.test_functions.empty()) {
          if (!(r.min_eig > 0.0))
            throw NumericalError("qds-study: Sigma_{n,t} is not positive definite; normal comparison undefined");
          double worst = 0.0;
          double worst_err = 0.0;
          for (const auto& h : config.test_functions) {
            const auto res = smooth_test_distance(xi, st, h);
            if (res.distance >= worst) {
              worst = res.distance;
              worst_err = res.stderr_;
            }
          }
          r.smooth_gap = worst;
          r.smooth_stderr = worst_err;
        }
      }
      rep.rows.push_back(r);
    }
  }

  for (std::size_t ti = 0; ti < config.t_grid.size(); ++ti) {
    std::vector<std::pair<double, double>> gaps;
    std::vector<std::pair<double, double>> dists;
    for (const auto& r : rep.rows) {
      if (r.t != config.t_grid[ti]) continue;
      gaps.emplace_back(static_cast<double>(r.n), r.gap);
      dists.emplace_back(static_cast<double>(r.n), d == 1 ? r.w1.distance : r.smooth_gap);
    }
    rep.gap_fit.push_back(detail::try_fit(gaps, false));
    rep.distance_fit.push_back(detail::try_fit(dists, false));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Random-environment study

struct RdsRow {
  int realization = -1;  ///< -1 for the across-realization aggregate
  std::int64_t N = 0;
  double sigma_sq = 0.0;
  double sigma_sq_stderr = std::numeric_limits<double>::quiet_NaN();
  DistanceEstimate w1;
  double median_distance = std::numeric_limits<double>::quiet_NaN();
};

struct RdsReport {
  std::vector<RdsRow> rows;
  double sigma_hat_sq = 0.0;  ///< lag-truncated series estimate averaged over realizations
  int lag_cutoff = 0;
  RateFit distance_fit;       ///< slope of the mean distance
  std::string driver;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  Report to_report() const {
    Report r;
    r.kind = "rds-study";
    r.columns = {"realization", "N", "sigma_sq", "sigma_sq_stderr", "distance", "mc_error", "noise_floor",
                 "median_distance"};
    for (const auto& row : rows) {
      r.rows.push_back({static_cast<double>(row.realization), static_cast<double>(row.N), row.sigma_sq,
                        row.sigma_sq_stderr, row.w1.distance, row.w1.mc_error, row.w1.noise_floor,
                        row.median_distance});
    }
    r.summary = {{"sigma_hat_sq", sigma_hat_sq},
                 {"lag_cutoff", static_cast<double>(lag_cutoff)},
                 {"beta", distance_fit.beta},
                 {"beta_stderr", distance_fit.stderr_},
                 {"r2", distance_fit.r2},
                 {"gamma", gamma},
                 {"seed", static_cast<double>(seed)}};
    r.tags = {{"driver", driver}, {"schema", std::to_string(kReportSchemaVersion)}};
    return r;
  }
};

inline RdsReport run_rds_study(const StudyConfig& config) {
  if (config.scenario != StudyConfig::Scenario::Random) throw ConfigError("rds-study: random scenario required");
  config.validate();
  const Observable f = config.make_observable();
  if (f.dim() != 1) throw ConfigError("rds-study: univariate observable required");
  const InitialDensity initial = config.make_initial();
  const GridDensity rho0 = GridDensity::from_initial(initial, config.grid);
  const std::int64_t n_max = config.n_grid.back();
  const int reps = config.realizations;

  RdsReport rep;
  rep.driver = config.driver->description();
  rep.gamma = config.driver->gamma();
  rep.seed = config.seed;

  std::vector<MapSchedule> envs;
  for (int r = 0; r < reps; ++r)
    envs.push_back(MapSchedule::random(config.driver, derive_seed(config.seed, 1000u + static_cast<std::uint64_t>(r)), n_max));

  if (config.lag_cutoff) {
    rep.lag_cutoff = *config.lag_cutoff;
  } else {
    CalibrationOptions copt;
    copt.theta.grid = config.grid;
    copt.theta.steps = static_cast<int>(std::min<std::int64_t>(30, n_max - 1));
    rep.lag_cutoff = default_lag_cutoff(calibrate_theta(envs.front(), initial, copt).constants.theta);
  }
  const int lag = rep.lag_cutoff;

  std::vector<MomentTable> tables;
  double hat_sum = 0.0;
  for (const auto& env : envs) {
    tables.push_back(MomentTable::build(env, f, rho0, n_max, lag));
    const auto& t = tables.back();
    // Series sum_k (2 - delta_k0) c(i, i + k) averaged over the origins
    // that see the full lag window.
    double s = 0.0;
    std::int64_t count = 0;
    for (std::int64_t i = 0; i + lag < n_max; ++i, ++count) {
      s += t.corr(i, 0)(0, 0);
      for (int k = 1; k <= lag; ++k) s += 2.0 * t.corr(i, k)(0, 0);
    }
    hat_sum += s / static_cast<double>(count);
  }
  rep.sigma_hat_sq = hat_sum / reps;
  const double sigma_hat = std::sqrt(std::max(rep.sigma_hat_sq, 0.0));

  for (std::size_t gi = 0; gi < config.n_grid.size(); ++gi) {
    const std::int64_t n = config.n_grid[gi];
    std::vector<double> s2(static_cast<std::size_t>(reps));
    std::vector<double> dist(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
      RdsRow row;
      row.realization = r;
      row.N = n;
      row.sigma_sq = tables[static_cast<std::size_t>(r)].covariance(n, lag)(0, 0);
      const std::uint64_t seed = derive_seed(derive_seed(config.seed, 1000u + static_cast<std::uint64_t>(r)),
                                             static_cast<std::uint64_t>(n));
      const WSamples w = sample_W(envs[static_cast<std::size_t>(r)], f, n, config.samples, seed, initial,
                                  tables[static_cast<std::size_t>(r)].means());
      row.w1 = w1_with_error(w.component(0), sigma_hat, seed, config.bootstrap);
      s2[static_cast<std::size_t>(r)] = row.sigma_sq;
      dist[static_cast<std::size_t>(r)] = row.w1.distance;
      rep.rows.push_back(row);
    }
    RdsRow agg;
    agg.N = n;
    double mean = 0.0, var = 0.0, dmean = 0.0;
    for (int r = 0; r < reps; ++r) {
      mean += s2[static_cast<std::size_t>(r)] / reps;
      dmean += dist[static_cast<std::size_t>(r)] / reps;
    }
    for (int r = 0; r < reps; ++r) var += (s2[static_cast<std::size_t>(r)] - mean) * (s2[static_cast<std::size_t>(r)] - mean);
    agg.sigma_sq = mean;
    agg.sigma_sq_stderr = std::sqrt(var / (reps - 1) / reps);
    agg.w1.distance = dmean;
    std::vector<double> sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    agg.median_distance = reps % 2 ? sorted[static_cast<std::size_t>(reps / 2)]
                                   : 0.5 * (sorted[static_cast<std::size_t>(reps / 2 - 1)] + sorted[static_cast<std::size_t>(reps / 2)]);
    agg.w1.mc_error = std::numeric_limits<double>::quiet_NaN();
    agg.w1.noise_floor = std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(agg);
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto& row : rep.rows)
    if (row.realization < 0) pts.emplace_back(static_cast<double>(row.N), row.w1.distance);
  rep.distance_fit = detail::try_fit(pts, false);
  return rep;
}

}  // namespace seqclt
