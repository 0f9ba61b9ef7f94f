#pragma once

// Time-dependent compositions: explicit (optionally cyclic) lists, rows of a
// quasistatic triangular array T_{n,k} = gamma_{k/n}, and Markov/iid random
// environments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "seqclt/circle_map.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/random.hpp"

namespace seqclt {

/// A Hoelder curve t -> gamma_t in the map family, with fixed degree.
class QuasistaticCurve {
 public:
  using Fn = std::function<double(double)>;

  /// `eta` and `holder_constant` are the declared Hoelder exponent and
  /// constant of t -> gamma_t in the d_C1 metric.
  QuasistaticCurve(int degree, Fn amplitude_fn, Fn phase_fn, double eta, double holder_constant,
                   std::string description = "custom")
      : degree_(degree),
        amplitude_fn_(std::move(amplitude_fn)),
        phase_fn_(std::move(phase_fn)),
        eta_(eta),
        holder_constant_(holder_constant),
        description_(std::move(description)) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConstraintError("QuasistaticCurve: eta must be in (0, 1]");
    if (holder_constant < 0.0) throw ConstraintError("QuasistaticCurve: negative Hoelder constant");
    // Every gamma_t must be expanding; check on a fine grid (throws otherwise).
    for (int j = 0; j <= 1024; ++j) (void)at(j / 1024.0);
  }

  /// gamma_t == map for all t.
  static QuasistaticCurve constant(const CircleMap& map) {
    const double a = map.amplitude();
    const double p = map.phase();
    std::ostringstream os;
    os << "constant(" << map.degree() << "," << a << "," << p << ")";
    return QuasistaticCurve(
        map.degree(), [a](double) { return a; }, [p](double) { return p; }, 1.0, 0.0, os.str());
  }

  /// amplitude(t) = base + cusp * |t - at|^eta, phase(t) = phase0 + phase_slope * t.
  ///
  /// ||x|^eta - |y|^eta| <= |x - y|^eta gives the declared constant
  /// C_H = (1 + 2 pi)|cusp| + (2 pi + 4 pi^2) max|amplitude| |phase_slope|.
  static QuasistaticCurve holder_cusp(int degree, double base, double cusp, double at, double eta,
                                      double phase0 = 0.0, double phase_slope = 0.0) {
    const double amax = std::abs(base) + std::abs(cusp) * std::pow(std::max(at, 1.0 - at), eta);
    const double ch = (1.0 + kTwoPi) * std::abs(cusp) +
                      (kTwoPi + kTwoPi * kTwoPi) * amax * std::abs(phase_slope);
    std::ostringstream os;
    os << "holder_cusp(" << degree << "," << base << "," << cusp << "," << at << "," << eta << ","
       << phase0 << "," << phase_slope << ")";
    return QuasistaticCurve(
        degree, [=](double t) { return base + cusp * std::pow(std::abs(t - at), eta); },
        [=](double t) { return phase0 + phase_slope * t; }, eta, ch, os.str());
  }

  CircleMap at(double t) const { return CircleMap(degree_, amplitude_fn_(t), phase_fn_(t)); }

  int degree() const { return degree_; }
  double eta() const { return eta_; }
  double holder_constant() const { return holder_constant_; }
  const std::string& description() const { return description_; }

  /// max over grid pairs of d_C1(gamma_s, gamma_t) / |s - t|^eta; a declared
  /// constant is consistent when this does not exceed it.
  double measured_holder_ratio(int tgrid = 64, int xgrid = 1024) const {
    double worst = 0.0;
    for (int a = 0; a <= tgrid; ++a) {
      for (int b = a + 1; b <= tgrid; ++b) {
        const double s = static_cast<double>(a) / tgrid;
        const double t = static_cast<double>(b) / tgrid;
        const double d = c1_distance(at(s), at(t), xgrid);
        worst = std::max(worst, d / std::pow(t - s, eta_));
      }
    }
    return worst;
  }

 private:
  int degree_;
  Fn amplitude_fn_;
  Fn phase_fn_;
  double eta_;
  double holder_constant_;
  std::string description_;
};

/// Random selection of maps from a finite parameter table, either iid or
/// driven by a finite-state Markov chain started from its stationary law.
class RandomDriver {
 public:
  enum class Kind { Iid, Markov };

  static RandomDriver iid(std::vector<CircleMap> states, std::vector<double> probabilities) {
    if (states.empty() || states.size() != probabilities.size())
      throw ConstraintError("RandomDriver::iid: states/probabilities mismatch");
    normalize_row(probabilities);
    const auto s = states.size();
    Eigen::MatrixXd p(s, s);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) p(i, j) = probabilities[j];
    return RandomDriver(Kind::Iid, std::move(states), p, std::numeric_limits<double>::infinity());
  }

  /// `transition(i, j)` is P(next = j | current = i). The chain must be
  /// irreducible and aperiodic; `gamma` is the mixing exponent to report.
  static RandomDriver markov(std::vector<CircleMap> states, Eigen::MatrixXd transition,
                             double gamma = std::numeric_limits<double>::infinity()) {
    const auto s = static_cast<Eigen::Index>(states.size());
    if (s == 0 || transition.rows() != s || transition.cols() != s)
      throw ConstraintError("RandomDriver::markov: transition matrix shape mismatch");
    for (Eigen::Index i = 0; i < s; ++i) {
      if (transition.row(i).minCoeff() < 0.0) throw ConstraintError("RandomDriver: negative transition");
      const double sum = transition.row(i).sum();
      if (!(sum > 0.0)) throw ConstraintError("RandomDriver: zero transition row");
      transition.row(i) /= sum;
    }
    return RandomDriver(Kind::Markov, std::move(states), std::move(transition), gamma);
  }

  /// Default four-state chain over (amplitude, phase) pairs at degree 2.
  static RandomDriver default_markov() {
    std::vector<CircleMap> states{CircleMap(2, 0.02, 0.0), CircleMap(2, 0.06, 0.25),
                                  CircleMap(2, 0.04, 0.5), CircleMap(3, 0.08, 0.1)};
    Eigen::MatrixXd p(4, 4);
    p << 0.6, 0.2, 0.1, 0.1,  //
        0.1, 0.6, 0.2, 0.1,   //
        0.1, 0.1, 0.6, 0.2,   //
        0.2, 0.1, 0.1, 0.6;
    return markov(std::move(states), p);
  }

  Kind kind() const { return kind_; }
  const std::vector<CircleMap>& states() const { return states_; }
  const Eigen::MatrixXd& transition() const { return transition_; }
  const Eigen::VectorXd& stationary() const { return stationary_; }
  double gamma() const { return gamma_; }

  /// State path of length `horizon` (entry i - 1 drives map i).
  std::vector<int> sample_path(std::uint64_t seed, std::int64_t horizon) const {
    Stream rng(seed, 0x5eedull);
    std::vector<int> path(static_cast<std::size_t>(horizon));
    int state = draw(rng, stationary_);
    for (std::int64_t i = 0; i < horizon; ++i) {
      if (i > 0) state = draw(rng, transition_.row(state).transpose());
      path[static_cast<std::size_t>(i)] = state;
    }
    return path;
  }

  std::string description() const {
    std::ostringstream os;
    os << (kind_ == Kind::Iid ? "iid" : "markov") << "[";
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (i) os << ";";
      os << states_[i].degree() << "," << states_[i].amplitude() << "," << states_[i].phase();
    }
    os << "]";
    return os.str();
  }

 private:
  RandomDriver(Kind kind, std::vector<CircleMap> states, Eigen::MatrixXd transition, double gamma)
      : kind_(kind), states_(std::move(states)), transition_(std::move(transition)), gamma_(gamma) {
    check_primitive();
    stationary_ = compute_stationary();
  }

  static void normalize_row(std::vector<double>& p) {
    double sum = 0.0;
    for (const double v : p) {
      if (v < 0.0) throw ConstraintError("RandomDriver: negative probability");
      sum += v;
    }
    if (!(sum > 0.0)) throw ConstraintError("RandomDriver: probabilities sum to zero");
    for (double& v : p) v /= sum;
  }

  // Irreducible and aperiodic <=> some power is strictly positive; Wielandt's
  // bound (s - 1)^2 + 1 on the exponent makes this a finite check.
  void check_primitive() const {
    const auto s = transition_.rows();
    Eigen::MatrixXd support = (transition_.array() > 0.0).cast<double>().matrix();
    Eigen::MatrixXd power = support;
    const auto limit = (s - 1) * (s - 1) + 1;
    for (Eigen::Index k = 1; k <= limit; ++k) {
      if ((power.array() > 0.0).all()) return;
      power = ((power * support).array() > 0.0).cast<double>().matrix();
    }
    throw ConstraintError("RandomDriver: chain is not irreducible and aperiodic");
  }

  Eigen::VectorXd compute_stationary() const {
    const auto s = transition_.rows();
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(s, 1.0 / static_cast<double>(s));
    for (int it = 0; it < 100000; ++it) {
      Eigen::VectorXd next = transition_.transpose() * pi;
      next /= next.sum();
      const double diff = (next - pi).lpNorm<1>();
      pi = next;
      if (diff < 1e-15) break;
    }
    return pi;
  }

  static int draw(Stream& rng, const Eigen::VectorXd& probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      acc += probs(i);
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
  }

  Kind kind_;
  std::vector<CircleMap> states_;
  Eigen::MatrixXd transition_;
  Eigen::VectorXd stationary_;
  double gamma_;
};

/// Rule producing the i-th map (i >= 1) of a composition T_i o ... o T_1.
class MapSchedule {
 public:
  static constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

  /// Maps used in order; with `cycle` the list repeats forever.
  static MapSchedule explicit_list(std::vector<CircleMap> maps, bool cycle = false) {
    if (maps.empty()) throw ConstraintError("MapSchedule: empty map list");
    MapSchedule s;
    s.variant_ = ExplicitList{std::move(maps), cycle};
    s.init_bounds();
    return s;
  }

  /// Autonomous system T_i = map for all i.
  static MapSchedule constant(const CircleMap& map) { return explicit_list({map}, true); }

  /// Row n of the triangular array, T_{n,k} = gamma_{k/n}, 0 <= k <= n.
  static MapSchedule quasistatic(std::shared_ptr<const QuasistaticCurve> curve, std::int64_t n) {
    if (!curve) throw ConstraintError("MapSchedule: null curve");
    if (n < 1) throw ConstraintError("MapSchedule: quasistatic row must be >= 1");
    MapSchedule s;
    s.variant_ = QuasistaticRow{std::move(curve), n};
    s.init_bounds();
    return s;
  }

  static MapSchedule quasistatic(const QuasistaticCurve& curve, std::int64_t n) {
    return quasistatic(std::make_shared<const QuasistaticCurve>(curve), n);
  }

  /// One realization omega of the random environment, precomputed up to `horizon`.
  static MapSchedule random(std::shared_ptr<const RandomDriver> driver, std::uint64_t seed,
                            std::int64_t horizon) {
    if (!driver) throw ConstraintError("MapSchedule: null driver");
    if (horizon < 1) throw ConstraintError("MapSchedule: horizon must be >= 1");
    MapSchedule s;
    auto path = driver->sample_path(seed, horizon);
    s.variant_ = RandomRealization{std::move(driver), seed, std::move(path)};
    s.init_bounds();
    return s;
  }

  static MapSchedule random(const RandomDriver& driver, std::uint64_t seed, std::int64_t horizon) {
    return random(std::make_shared<const RandomDriver>(driver), seed, horizon);
  }

  std::int64_t horizon() const {
    return std::visit(
        [](const auto& v) -> std::int64_t {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, ExplicitList>) {
            return v.cycle ? kUnbounded : static_cast<std::int64_t>(v.maps.size());
          } else if constexpr (std::is_same_v<V, QuasistaticRow>) {
            return v.n;
          } else {
            return static_cast<std::int64_t>(v.path.size());
          }
        },
        variant_);
  }

  /// The i-th map, 1 <= i <= horizon.
  CircleMap map(std::int64_t i) const {
    if (i < 1 || i > horizon()) {
      std::ostringstream os;
      os << "MapSchedule: index " << i << " outside [1, " << horizon() << "]";
      throw ConstraintError(os.str());
    }
    return at_index(i);
  }

  /// Quasistatic rows also define T_{n,0} = gamma_0; for other variants k = 0
  /// is not part of the schedule.
  CircleMap row_map(std::int64_t k) const {
    if (const auto* q = std::get_if<QuasistaticRow>(&variant_)) {
      if (k < 0 || k > q->n) throw ConstraintError("MapSchedule: row index out of range");
      return q->curve->at(static_cast<double>(k) / static_cast<double>(q->n));
    }
    return map(k);
  }

  double lambda_min() const { return lambda_min_; }
  double a_star_max() const { return a_star_max_; }

  bool is_quasistatic() const { return std::holds_alternative<QuasistaticRow>(variant_); }
  bool is_random() const { return std::holds_alternative<RandomRealization>(variant_); }

  /// Stable textual identity of the schedule (used in reports).
  std::string fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, ExplicitList>) {
            os << (v.cycle ? "cyclic[" : "explicit[");
            for (std::size_t i = 0; i < v.maps.size(); ++i) {
              if (i) os << ";";
              os << v.maps[i].degree() << "," << v.maps[i].amplitude() << "," << v.maps[i].phase();
            }
            os << "]";
          } else if constexpr (std::is_same_v<V, QuasistaticRow>) {
            os << "quasistatic[" << v.curve->description() << ",n=" << v.n << "]";
          } else {
            os << "random[" << v.driver->description() << ",seed=" << v.seed
               << ",horizon=" << v.path.size() << "]";
          }
        },
        variant_);
    return os.str();
  }

 private:
  struct ExplicitList {
    std::vector<CircleMap> maps;
    bool cycle;
  };
  struct QuasistaticRow {
    std::shared_ptr<const QuasistaticCurve> curve;
    std::int64_t n;
  };
  struct RandomRealization {
    std::shared_ptr<const RandomDriver> driver;
    std::uint64_t seed;
    std::vector<int> path;
  };

  MapSchedule() = default;

  CircleMap at_index(std::int64_t i) const {
    return std::visit(
        [i](const auto& v) -> CircleMap {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, ExplicitList>) {
            return v.maps[static_cast<std::size_t>((i - 1) % static_cast<std::int64_t>(v.maps.size()))];
          } else if constexpr (std::is_same_v<V, QuasistaticRow>) {
            return v.curve->at(static_cast<double>(i) / static_cast<double>(v.n));
          } else {
            return v.driver->states()[static_cast<std::size_t>(v.path[static_cast<std::size_t>(i - 1)])];
          }
        },
        variant_);
  }

  void init_bounds() {
    lambda_min_ = std::numeric_limits<double>::infinity();
    a_star_max_ = 0.0;
    auto visit_map = [this](const CircleMap& m) {
      lambda_min_ = std::min(lambda_min_, m.lambda());
      a_star_max_ = std::max(a_star_max_, m.a_star());
    };
    if (const auto* e = std::get_if<ExplicitList>(&variant_)) {
      for (const auto& m : e->maps) visit_map(m);
    } else if (const auto* q = std::get_if<QuasistaticRow>(&variant_)) {
      for (std::int64_t k = 0; k <= q->n; ++k) visit_map(row_map(k));
    } else if (const auto* r = std::get_if<RandomRealization>(&variant_)) {
      for (const auto& m : r->driver->states()) visit_map(m);
    }
  }

  std::variant<ExplicitList, QuasistaticRow, RandomRealization> variant_;
  double lambda_min_ = 0.0;
  double a_star_max_ = 0.0;
};

/// [x0, T_1 x0, T_2 T_1 x0, ..., T_N ... T_1 x0].
inline std::vector<double> iterate_orbit(const MapSchedule& schedule, double x0, std::int64_t n) {
  if (n < 0) throw ConstraintError("iterate_orbit: negative length");
  if (n > schedule.horizon()) throw ConstraintError("iterate_orbit: N exceeds schedule horizon");
  std::vector<double> orbit;
  orbit.reserve(static_cast<std::size_t>(n) + 1);
  orbit.push_back(x0);
  double x = x0;
  for (std::int64_t i = 1; i <= n; ++i) {
    x = schedule.map(i)(x);
    orbit.push_back(x);
  }
  return orbit;
}

/// Maps 1..n materialized once for tight sampling loops.
inline std::vector<CircleMap> materialize(const MapSchedule& schedule, std::int64_t n) {
  if (n > schedule.horizon()) throw ConstraintError("materialize: N exceeds schedule horizon");
  std::vector<CircleMap> maps;
  maps.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  for (std::int64_t i = 1; i <= n; ++i) maps.push_back(schedule.map(i));
  return maps;
}

}  // namespace seqclt
