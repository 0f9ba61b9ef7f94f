#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "seqclt/errors.hpp"
#include "seqclt/initial_density.hpp"

namespace seqclt {

inline constexpr int kDefaultGridSize = 4096;

inline void check_grid_size(int m) {
  if (m < 2 || (m & (m - 1)) != 0) throw ConstraintError("grid size must be a power of two >= 2");
}

/// Periodic trapezoid rule on the nodes j / M is the plain average.
inline double grid_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline std::vector<double> sample_on_grid(const std::function<double(double)>& f, int m) {
  std::vector<double> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = f(static_cast<double>(j) / m);
  return out;
}

/// Probability density on S^1 sampled at x_j = j / M, normalized so that the
/// trapezoid integral is 1.
class GridDensity {
 public:
  explicit GridDensity(std::vector<double> values) : values_(std::move(values)) {
    check_grid_size(static_cast<int>(values_.size()));
    for (const double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConstraintError("GridDensity: values must be finite and >= 0");
    }
    normalize();
  }

  static GridDensity uniform(int m = kDefaultGridSize) {
    return GridDensity(std::vector<double>(static_cast<std::size_t>(m), 1.0));
  }

  static GridDensity from_function(const std::function<double(double)>& f, int m = kDefaultGridSize) {
    return GridDensity(sample_on_grid(f, m));
  }

  static GridDensity from_initial(const InitialDensity& rho, int m = kDefaultGridSize) {
    return from_function([&rho](double x) { return rho(x); }, m);
  }

  int size() const { return static_cast<int>(values_.size()); }
  double x(int j) const { return static_cast<double>(j) / size(); }
  double operator[](int j) const { return values_[static_cast<std::size_t>(j)]; }
  const std::vector<double>& values() const { return values_; }
  double mass() const { return grid_mean(values_); }

 private:
  void normalize() {
    const double mass = grid_mean(values_);
    if (!(mass > 0.0)) throw ConstraintError("GridDensity: zero mass");
    for (double& v : values_) v /= mass;
  }

  std::vector<double> values_;
};

/// Trapezoid quadrature of f * g.
inline double integrate(const std::function<double(double)>& f, const GridDensity& g) {
  const int m = g.size();
  double s = 0.0;
  for (int j = 0; j < m; ++j) s += f(g.x(j)) * g[j];
  return s / m;
}

inline double integrate(const std::vector<double>& f_on_grid, const std::vector<double>& g) {
  if (f_on_grid.size() != g.size()) throw ConstraintError("integrate: grid size mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) s += f_on_grid[j] * g[j];
  return s / static_cast<double>(g.size());
}

inline double l1_distance(const std::vector<double>& g1, const std::vector<double>& g2) {
  if (g1.size() != g2.size()) throw ConstraintError("l1_distance: grid size mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < g1.size(); ++j) s += std::abs(g1[j] - g2[j]);
  return s / static_cast<double>(g1.size());
}

inline double l1_distance(const GridDensity& g1, const GridDensity& g2) {
  return l1_distance(g1.values(), g2.values());
}

/// Largest grid slope of log g, ignoring the single largest increment (the
/// one jump point a density in D_L may have).
inline double lipschitz_log(const GridDensity& g) {
  const int m = g.size();
  double first = 0.0;
  double second = 0.0;
  for (int j = 0; j < m; ++j) {
    const double a = g[j];
    const double b = g[(j + 1) % m];
    if (!(a > 0.0) || !(b > 0.0)) throw ConstraintError("lipschitz_log: density must be positive");
    const double slope = std::abs(std::log(b) - std::log(a)) * m;
    if (slope > first) {
      second = first;
      first = slope;
    } else if (slope > second) {
      second = slope;
    }
  }
  return second;
}

/// Writes "x,value" rows with a header.
inline void write_density_csv(const GridDensity& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out << "x,value\n";
  char buf[64];
  for (int j = 0; j < g.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g.x(j), g[j]);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace seqclt
