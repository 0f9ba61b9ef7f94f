// Command-line front end for the studies and the standalone calculators.
//
// Exit codes: 0 success, 2 configuration / constraint error, 3 numerical
// failure, 1 anything else (I/O included).

#include <CLI11.hpp>

#include <cstdint>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqclt/bounds.hpp"
#include "seqclt/distances.hpp"
#include "seqclt/experiments.hpp"
#include "seqclt/random.hpp"
#include "seqclt/report.hpp"
#include "seqclt/stein.hpp"
#include "seqclt/transfer.hpp"

namespace {

using namespace seqclt;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  std::optional<int> grid;
  std::optional<std::int64_t> samples;
};

void add_common(CLI::App* app, Common& c, bool with_config) {
  if (with_config) app->add_option("--config", c.config, "study configuration (JSON)")->required();
  app->add_option("--seed", c.seed, "random seed (overrides the config)");
  app->add_option("--out", c.out, "output path (default: stdout)");
  app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--grid", c.grid, "transfer-operator grid size M (power of two)");
  app->add_option("--samples", c.samples, "Monte Carlo sample count m");
}

void write(const Report& r, const Common& c) {
  const ReportFormat fmt = parse_report_format(c.format);
  if (c.out.empty()) {
    std::cout << render_report(r, fmt);
  } else {
    emit_report(r, c.out, fmt);
  }
}

StudyConfig load(const Common& c) {
  StudyConfig cfg = StudyConfig::from_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.grid) cfg.grid = *c.grid;
  if (c.samples) cfg.samples = *c.samples;
  cfg.validate();
  return cfg;
}

// key=value arguments of the `bound` subcommand.
class Params {
 public:
  explicit Params(const std::vector<std::string>& args) {
    for (const auto& a : args) {
      const auto eq = a.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("bound: expected key=value, got '" + a + "'");
      const std::string key = a.substr(0, eq);
      try {
        std::size_t used = 0;
        values_[key] = std::stod(a.substr(eq + 1), &used);
        if (used != a.size() - eq - 1) throw std::invalid_argument(a);
      } catch (const std::logic_error&) {
        throw ConfigError("bound: cannot parse a number in '" + a + "'");
      }
    }
  }

  double get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("bound: missing parameter " + key);
    used_.push_back(key);
    return it->second;
  }
  double get(const std::string& key, double fallback) const { return values_.count(key) ? get(key) : fallback; }
  std::int64_t integer(const std::string& key) const { return static_cast<std::int64_t>(get(key)); }

  void check_all_used() const {
    for (const auto& [k, v] : values_) {
      bool found = false;
      for (const auto& u : used_) found = found || u == k;
      if (!found) throw ConfigError("bound: unknown parameter " + k);
    }
  }

 private:
  std::map<std::string, double> values_;
  mutable std::vector<std::string> used_;
};

Report scalar_report(const std::string& name, double value) {
  Report r;
  r.kind = "bound";
  r.tags["name"] = name;
  r.summary["value"] = value;
  return r;
}

Report bound_to_report(const BoundReport& b) {
  Report r = scalar_report(b.name, b.value);
  r.summary["N"] = static_cast<double>(b.N);
  if (b.K >= 0) r.summary["K"] = static_cast<double>(b.K);
  for (const auto& [label, v] : b.pieces) r.summary["piece:" + label] = v;
  for (const auto& [flag, v] : b.flags) r.summary["flag:" + flag] = v ? 1.0 : 0.0;
  return r;
}

Report run_bound(const std::string& name, const std::vector<std::string>& args) {
  const Params p(args);
  Report r;
  if (name == "c_star") {
    r = scalar_report(name, c_star(static_cast<int>(p.integer("d")), p.get("C2"), p.get("C4"), p.get("sup_f"),
                                   p.get("d2h"), p.get("d3h"), p.get("theta")));
  } else if (name == "thm_main") {
    r = bound_to_report(thm_main_bound(p.get("cstar"), p.integer("N"), p.integer("K"), p.get("theta"),
                                       p.get("rho_tilde")));
  } else if (name == "c_sharp") {
    const CSharp c = c_sharp(p.get("sigma"), p.get("C2"), p.get("C4"), p.get("sup_f"), p.get("theta"));
    r = scalar_report(name, c.c_sharp);
    r.summary["c_sharp"] = c.c_sharp;
    r.summary["c_sharp_prime"] = c.c_sharp_prime;
  } else if (name == "thm_wasserstein") {
    const CSharp c = c_sharp(p.get("sigma"), p.get("C2"), p.get("C4"), p.get("sup_f"), p.get("theta"));
    r = bound_to_report(
        thm_wasserstein_bound(c, p.integer("N"), p.integer("K"), p.get("theta"), p.get("rho_tilde")));
  } else if (name == "choose_K") {
    const KChoice k = choose_K(p.integer("N"), p.get("theta"));
    r = scalar_report(name, static_cast<double>(k.K));
    r.summary["K"] = static_cast<double>(k.K);
    r.summary["valid"] = k.valid ? 1.0 : 0.0;
    r.summary["k_plus_1_bound"] = k.k_plus_1_bound;
  } else if (name == "circle_C_tilde") {
    r = scalar_report(name, circle_C_tilde(p.get("C2"), p.get("C4"), p.get("sup_f"), p.get("f_lip"), p.get("B0"),
                                           p.get("theta")));
  } else if (name == "circle_wasserstein") {
    r = bound_to_report(circle_wasserstein_bound(p.get("C_tilde"), p.get("C0"), p.get("p", 0.0), p.integer("N"),
                                                 p.get("theta")));
  } else if (name == "circle_variance_free") {
    r = bound_to_report(circle_variance_free_bound(p.get("C_tilde"), p.integer("N"), p.get("theta")));
  } else if (name == "circle_self_normalized") {
    r = bound_to_report(circle_self_normalized_bound(p.get("C_tilde"), p.get("C0"), p.get("p", 0.0),
                                                     p.integer("N"), p.get("theta")));
  } else if (name == "normal_w1") {
    r = scalar_report(name, normal_w1_bound(p.get("a"), p.get("b")));
  } else if (name == "l_star") {
    r = scalar_report(name, l_star(p.get("lambda"), p.get("a_star")));
  } else {
    throw ConfigError("bound: unknown bound '" + name +
                      "' (c_star, thm_main, c_sharp, thm_wasserstein, choose_K, circle_C_tilde, "
                      "circle_wasserstein, circle_variance_free, circle_self_normalized, normal_w1, l_star)");
  }
  p.check_all_used();
  return r;
}

Report run_stein_check(double sigma_sq, std::int64_t m, std::uint64_t seed) {
  if (m < 1) throw ConfigError("stein-check: samples must be >= 1");
  const double sigma = std::sqrt(sigma_sq);
  Stream rng(seed, 0);
  std::vector<double> w(static_cast<std::size_t>(m));
  for (auto& x : w) x = sigma * rng.normal();
  Report r;
  r.kind = "stein-check";
  r.columns = {"index", "lhs", "rhs", "gap", "sup_A", "sup_dA", "sup_d2A", "residual"};
  const auto catalog = SteinTestFunction::catalog();
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto id = stein_identity_check(w, catalog[i], sigma_sq);
    const auto sol = stein_solve_1d(catalog[i], sigma_sq);
    r.rows.push_back({static_cast<double>(i), id.lhs, id.rhs, id.gap, sol.sup_A(sol.window), sol.sup_dA(sol.window),
                      sol.sup_d2A(sol.window), sol.residual});
    r.tags["h" + std::to_string(i)] = catalog[i].name;
  }
  r.summary["sigma_sq"] = sigma_sq;
  r.summary["samples"] = static_cast<double>(m);
  r.summary["seed"] = static_cast<double>(seed);
  return r;
}

Report run_invariant_density(int degree, double amplitude, double phase, double tol, int grid) {
  const CircleMap map(degree, amplitude, phase);
  const auto res = invariant_density_detailed(map, tol, grid);
  Report r;
  r.kind = "invariant-density";
  r.columns = {"x", "rho"};
  for (int i = 0; i < res.density.size(); ++i) r.rows.push_back({res.density.x(i), res.density[i]});
  r.summary["residual"] = res.residual;
  r.summary["iterations"] = res.iterations;
  r.summary["log_lipschitz"] = lipschitz_log(res.density);
  char desc[96];
  std::snprintf(desc, sizeof desc, "k=%d,a=%.17g,phi=%.17g", degree, amplitude, map.phase());
  r.tags["map"] = desc;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistics of sequential and quasistatic expanding circle maps"};
  app.require_subcommand(1);

  Common rate, qds, rds, bound_opts, stein_opts, inv_opts;
  auto* rate_cmd = app.add_subcommand("rate-study", "Wasserstein rate study for a sequential schedule");
  add_common(rate_cmd, rate, true);
  auto* qds_cmd = app.add_subcommand("qds-study", "variance and distance study for a quasistatic curve");
  add_common(qds_cmd, qds, true);
  auto* rds_cmd = app.add_subcommand("rds-study", "quenched study for random compositions");
  add_common(rds_cmd, rds, true);

  std::string bound_name;
  std::vector<std::string> bound_args;
  auto* bound_cmd = app.add_subcommand("bound", "evaluate one bound formula from key=value parameters");
  bound_cmd->add_option("name", bound_name, "bound name")->required();
  bound_cmd->add_option("params", bound_args, "key=value parameters");
  bound_cmd->add_option("--out", bound_opts.out, "output path (default: stdout)");
  bound_cmd->add_option("--format", bound_opts.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  double stein_sigma_sq = 1.0;
  auto* stein_cmd = app.add_subcommand("stein-check", "Stein identity and solution bounds for the catalog");
  add_common(stein_cmd, stein_opts, false);
  stein_cmd->add_option("--sigma2", stein_sigma_sq, "variance sigma^2");

  int degree = 2;
  double amplitude = 0.1;
  double phase = 0.0;
  double tol = 1e-12;
  auto* inv_cmd = app.add_subcommand("invariant-density", "invariant density of one family map");
  add_common(inv_cmd, inv_opts, false);
  inv_cmd->add_option("--degree", degree, "map degree k >= 2");
  inv_cmd->add_option("--amplitude", amplitude, "perturbation amplitude a");
  inv_cmd->add_option("--phase", phase, "phase");
  inv_cmd->add_option("--tol", tol, "L1 step tolerance of the power iteration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rate_cmd) {
      write(run_rate_study(load(rate)).to_report(), rate);
    } else if (*qds_cmd) {
      write(run_qds_study(load(qds)).to_report(), qds);
    } else if (*rds_cmd) {
      write(run_rds_study(load(rds)).to_report(), rds);
    } else if (*bound_cmd) {
      write(run_bound(bound_name, bound_args), bound_opts);
    } else if (*stein_cmd) {
      write(run_stein_check(stein_sigma_sq, stein_opts.samples.value_or(10000), stein_opts.seed.value_or(1)),
            stein_opts);
    } else if (*inv_cmd) {
      write(run_invariant_density(degree, amplitude, phase, tol, inv_opts.grid.value_or(kDefaultGridSize)), inv_opts);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConstraintError& e) {
    std::cerr << "constraint error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
