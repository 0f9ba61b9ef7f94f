#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seqclt/circle_map.hpp"
#include "seqclt/errors.hpp"
#include "seqclt/grid_density.hpp"

namespace seqclt {

/// One scalar coordinate of an observable with declared sup and Lipschitz
/// bounds. The trigonometric kinds bypass std::function in hot loops.
class ScalarObservable {
 public:
  enum class Kind { Cos, Sin, Constant, Custom };

  static ScalarObservable cosine(int m) { return {Kind::Cos, m, 1.0, nullptr, 1.0, kTwoPi * m, "cos" + std::to_string(m)}; }
  static ScalarObservable sine(int m) { return {Kind::Sin, m, 1.0, nullptr, 1.0, kTwoPi * m, "sin" + std::to_string(m)}; }
  static ScalarObservable constant(double c) {
    std::ostringstream os;
    os << "const:" << c;
    return {Kind::Constant, 0, c, nullptr, std::abs(c), 0.0, os.str()};
  }
  static ScalarObservable custom(std::function<double(double)> fn, double sup, double lip, std::string name) {
    if (!fn) throw ConstraintError("ScalarObservable: empty function");
    return {Kind::Custom, 0, 1.0, std::move(fn), sup, lip, std::move(name)};
  }

  /// Parses "cosM", "sinM" or "const:C".
  static ScalarObservable parse(const std::string& spec) {
    try {
      if (spec.rfind("cos", 0) == 0) return cosine(std::stoi(spec.substr(3)));
      if (spec.rfind("sin", 0) == 0) return sine(std::stoi(spec.substr(3)));
      if (spec.rfind("const:", 0) == 0) return constant(std::stod(spec.substr(6)));
    } catch (const std::logic_error&) {
    }
    throw ConfigError("unknown observable '" + spec + "' (expected cosM, sinM or const:C)");
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::Cos:
        return std::cos(kTwoPi * freq_ * x);
      case Kind::Sin:
        return std::sin(kTwoPi * freq_ * x);
      case Kind::Constant:
        return value_;
      case Kind::Custom:
        break;
    }
    return fn_(x);
  }

  Kind kind() const { return kind_; }
  double sup() const { return sup_; }
  double lip() const { return lip_; }
  const std::string& name() const { return name_; }

 private:
  ScalarObservable(Kind kind, int freq, double value, std::function<double(double)> fn, double sup, double lip,
                   std::string name)
      : kind_(kind), freq_(freq), value_(value), fn_(std::move(fn)), sup_(sup), lip_(lip), name_(std::move(name)) {}

  Kind kind_;
  int freq_;
  double value_;
  std::function<double(double)> fn_;
  double sup_;
  double lip_;
  std::string name_;
};

/// R^d-valued Lipschitz observable. Norms follow the max convention over
/// coordinates: sup = max sup_alpha, lip = max lip_alpha.
class Observable {
 public:
  explicit Observable(std::vector<ScalarObservable> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConstraintError("Observable: no components");
  }

  Observable(ScalarObservable component) : components_{std::move(component)} {}  // NOLINT

  static Observable parse(const std::vector<std::string>& specs) {
    std::vector<ScalarObservable> comps;
    for (const auto& s : specs) comps.push_back(ScalarObservable::parse(s));
    return Observable(std::move(comps));
  }

  int dim() const { return static_cast<int>(components_.size()); }
  const ScalarObservable& component(int a) const { return components_[static_cast<std::size_t>(a)]; }

  double sup() const {
    double s = 0.0;
    for (const auto& c : components_) s = std::max(s, c.sup());
    return s;
  }
  double lip() const {
    double s = 0.0;
    for (const auto& c : components_) s = std::max(s, c.lip());
    return s;
  }
  double norm_lip() const { return sup() + lip(); }

  bool is_zero() const {
    return std::all_of(components_.begin(), components_.end(), [](const ScalarObservable& c) {
      return c.kind() == ScalarObservable::Kind::Constant && c.sup() == 0.0;
    });
  }

  Eigen::VectorXd operator()(double x) const {
    Eigen::VectorXd v(dim());
    for (int a = 0; a < dim(); ++a) v(a) = components_[static_cast<std::size_t>(a)](x);
    return v;
  }

  /// Grid values of coordinate a on x_j = j / M.
  std::vector<double> on_grid(int a, int m) const {
    const auto& c = component(a);
    return sample_on_grid([&c](double x) { return c(x); }, m);
  }

  std::string description() const {
    std::string s;
    for (const auto& c : components_) {
      if (!s.empty()) s += ",";
      s += c.name();
    }
    return s;
  }

  /// Maximum violation of the declared sup and Lipschitz bounds on a uniform
  /// grid (0 when all hold).
  double bound_violation(int grid = 10000) const {
    double worst = 0.0;
    for (const auto& c : components_) {
      double prev = c(0.0);
      for (int j = 0; j <= grid; ++j) {
        const double x = static_cast<double>(j) / grid;
        const double v = c(x);
        worst = std::max(worst, std::abs(v) - c.sup());
        if (j > 0) worst = std::max(worst, std::abs(v - prev) * grid - c.lip());
        prev = v;
      }
    }
    return std::max(worst, 0.0);
  }

 private:
  std::vector<ScalarObservable> components_;
};

}  // namespace seqclt
