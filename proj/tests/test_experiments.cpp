#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqclt/errors.hpp"
#include "seqclt/experiments.hpp"
#include "seqclt/report.hpp"

using namespace seqclt;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("seqclt_test_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_rate_config() {
  return json::parse(R"({
    "scenario": "sequential",
    "schedule": {"maps": [{"degree": 2, "amplitude": 0.12}, {"degree": 2, "amplitude": 0.12, "phase": 0.5}]},
    "observable": "cos1",
    "initial_epsilon": 0.3,
    "N_grid": [16, 32, 64],
    "samples": 2000,
    "grid": 1024,
    "seed": 5,
    "bootstrap": 8
  })");
}

}  // namespace

TEST(FitRate, Examples) {
  std::vector<std::pair<double, double>> pure, with_log;
  for (const double n : {64.0, 128.0, 256.0, 512.0}) {
    pure.emplace_back(n, 1.0 / std::sqrt(n));
    with_log.emplace_back(n, std::log(n) / std::sqrt(n));
  }
  const auto a = fit_rate(pure, false);
  EXPECT_NEAR(a.beta, -0.5, 1e-12);
  EXPECT_NEAR(a.r2, 1.0, 1e-12);
  EXPECT_NEAR(fit_rate(with_log, true).beta, -0.5, 1e-12);
  EXPECT_GT(fit_rate(with_log, false).beta, -0.5);
  EXPECT_THROW(fit_rate({{64.0, 0.1}, {128.0, 0.07}}, false), ConstraintError);
  EXPECT_THROW(fit_rate({{64.0, 0.1}, {128.0, 0.0}, {256.0, 0.05}}, false), ConstraintError);
}

TEST(StudyConfig, Validation) {
  auto c = small_rate_config();
  EXPECT_NO_THROW(StudyConfig::from_json(c));
  c["N_grid"] = {32, 16};
  EXPECT_THROW(StudyConfig::from_json(c), ConfigError);
  c = small_rate_config();
  c["samples"] = 999;
  EXPECT_THROW(StudyConfig::from_json(c), ConfigError);
  c = small_rate_config();
  c["grid"] = 1000;
  EXPECT_THROW(StudyConfig::from_json(c), ConfigError);
  c = small_rate_config();
  c["schedule"]["maps"][0]["amplitude"] = 0.5;
  EXPECT_THROW(StudyConfig::from_json(c), ConfigError);
  c = small_rate_config();
  c["scenario"] = "chaotic";
  EXPECT_THROW(StudyConfig::from_json(c), ConfigError);
  EXPECT_THROW(StudyConfig::from_file("/nonexistent/config.json"), ConfigError);
}

TEST(StudyConfig, ConfiguredConstants) {
  auto c = small_rate_config();
  c["constants"] = json::parse(R"({"theta": 0.85, "C2": 0.6, "C4": 0.5, "B0": 2.0})");
  const auto cfg = StudyConfig::from_json(c);
  ASSERT_TRUE(cfg.constants.has_value());
  EXPECT_EQ(cfg.constants->theta, 0.85);
  const auto rep = run_rate_study(cfg);
  EXPECT_EQ(rep.constants.theta, 0.85);
  EXPECT_EQ(rep.to_report().tags.at("constants_source"), "configured");
  // theta below 1 / lambda_min contradicts the schedule.
  c["constants"]["theta"] = 0.5;
  EXPECT_THROW(run_rate_study(StudyConfig::from_json(c)), ConstraintError);
}

TEST(Report, EmptyCsvIsHeaderOnly) {
  Report r;
  r.columns = {"N", "distance"};
  EXPECT_EQ(report_to_csv(r), "N,distance\n");
}

TEST(Report, JsonRoundTripWithNonFinite) {
  Report r;
  r.kind = "test";
  r.columns = {"a", "b"};
  r.rows = {{1.0, 0.1}, {2.0, 1.0 / 3.0}};
  r.summary = {{"x", 0.25}, {"y", -1e-300}};
  r.tags = {{"name", "t"}};
  const auto path = temp_path("roundtrip.json");
  emit_report(r, path, ReportFormat::Json);
  EXPECT_EQ(read_json_report(path), r);

  Report n = r;
  n.rows[0][1] = std::numeric_limits<double>::quiet_NaN();
  emit_report(n, path, ReportFormat::Json);
  const auto back = read_json_report(path);
  EXPECT_TRUE(std::isnan(back.rows[0][1]));
  std::filesystem::remove(path);
}

TEST(Report, UnwritablePathIsIoError) {
  EXPECT_THROW(emit_report(Report{}, "/nonexistent/dir/out.csv", ReportFormat::Csv), IoError);
}

TEST(RateStudy, RowsAndInvariants) {
  const auto rep = run_rate_study(StudyConfig::from_json(small_rate_config()));
  ASSERT_EQ(rep.rows.size(), 3u);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& row = rep.rows[i];
    if (i > 0) EXPECT_GT(row.N, rep.rows[i - 1].N);
    EXPECT_GT(row.sigma_sq, 0.0);
    EXPECT_GE(row.w1.mc_error, 0.0);
    EXPECT_GE(row.bound, row.w1.distance - 3.0 * row.w1.mc_error);
    EXPECT_EQ(row.bound_min, std::min(row.bound_variance, row.bound_variance_free));
    EXPECT_FALSE(row.degenerate);
  }
  EXPECT_FALSE(rep.fit_rejected);
  EXPECT_EQ(rep.constants.source, DecayConstants::Source::Calibrated);
}

TEST(RateStudy, ZeroObservableIsDegenerate) {
  auto c = small_rate_config();
  c["observable"] = "const:0";
  const auto rep = run_rate_study(StudyConfig::from_json(c));
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(row.degenerate);
    EXPECT_EQ(row.w1.distance, 0.0);
    EXPECT_TRUE(row.fallback);
    EXPECT_EQ(row.bound, row.bound_variance_free);
  }
  EXPECT_TRUE(rep.fit_rejected);
}

TEST(RateStudy, DeterministicBytes) {
  const auto cfg = StudyConfig::from_json(small_rate_config());
  const auto p1 = temp_path("det1.csv");
  const auto p2 = temp_path("det2.csv");
  emit_report(run_rate_study(cfg).to_report(), p1, ReportFormat::Csv);
  emit_report(run_rate_study(cfg).to_report(), p2, ReportFormat::Csv);
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_FALSE(slurp(p1).empty());
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(QdsStudy, ConstantDoublingCurve) {
  const auto c = json::parse(R"({
    "scenario": "quasistatic",
    "curve": {"type": "constant", "map": {"degree": 2, "amplitude": 0.0}},
    "observable": "cos1",
    "n_grid": [32, 64, 128],
    "t_grid": [0.0, 1.0],
    "samples": 2000,
    "grid": 1024,
    "bootstrap": 8,
    "seed": 3
  })");
  const auto rep = run_qds_study(StudyConfig::from_json(c));
  ASSERT_EQ(rep.rows.size(), 6u);
  for (const auto& row : rep.rows) {
    if (row.t == 0.0) {
      EXPECT_EQ(row.sigma_sq_t, 0.0);
      EXPECT_EQ(row.sigma_sq_nt, 0.0);
      EXPECT_EQ(row.w1.distance, 0.0);
    } else {
      EXPECT_NEAR(row.sigma_sq_t, 0.5, 1e-5);
      // Zero correlations at every lag: Var xi_n(1) is exactly 1/2.
      EXPECT_NEAR(row.sigma_sq_nt, 0.5, 1e-10);
      EXPECT_LT(row.w1.distance, row.w1.noise_floor + 4.0 * row.w1.mc_error + 0.02);
    }
  }
}

TEST(QdsStudy, MultivariateChecksPositiveDefiniteness) {
  const auto c = json::parse(R"({
    "scenario": "quasistatic",
    "curve": {"type": "holder_cusp", "degree": 2, "base": 0.05, "cusp": 0.1, "eta": 0.8, "phase_slope": 0.2},
    "observable": ["cos1", "sin1"],
    "n_grid": [32, 64, 128],
    "t_grid": [1.0],
    "samples": 4000,
    "grid": 1024,
    "quad_points": 33,
    "bootstrap": 8,
    "test_functions": [{"v": [1.0, 0.0]}, {"v": [0.6, 0.8], "c": 0.3}]
  })");
  const auto rep = run_qds_study(StudyConfig::from_json(c));
  for (const auto& row : rep.rows) {
    EXPECT_GT(row.min_eig, 0.0);
    EXPECT_LT(row.smooth_gap, 0.05);
  }
  const auto dup = [&] {
    auto d = c;
    d["observable"] = {"cos1", "cos1"};
    return StudyConfig::from_json(d);
  }();
  EXPECT_THROW(run_qds_study(dup), NumericalError);
}

TEST(RdsStudy, SingleStateReducesToRateStudy) {
  auto rate_cfg = small_rate_config();
  rate_cfg["schedule"]["maps"] = json::array({json::parse(R"({"degree": 2, "amplitude": 0.1})")});
  const auto rate = run_rate_study(StudyConfig::from_json(rate_cfg));

  const auto rds_cfg = json::parse(R"({
    "scenario": "random",
    "driver": {"kind": "iid", "states": [{"degree": 2, "amplitude": 0.1}]},
    "realizations": 2,
    "observable": "cos1",
    "initial_epsilon": 0.3,
    "N_grid": [16, 32, 64],
    "samples": 2000,
    "grid": 1024,
    "seed": 5,
    "bootstrap": 8
  })");
  const auto rds = run_rds_study(StudyConfig::from_json(rds_cfg));
  const double sigma_hat = std::sqrt(rds.sigma_hat_sq);
  for (const auto& row : rds.rows) {
    const auto& ref = *std::find_if(rate.rows.begin(), rate.rows.end(), [&](const RateRow& r) { return r.N == row.N; });
    EXPECT_NEAR(row.sigma_sq, ref.sigma_sq, 1e-12);
    if (row.realization < 0) continue;
    const double shift = std::abs(sigma_hat - std::sqrt(ref.sigma_sq)) * std::sqrt(2.0 / std::numbers::pi);
    const double noise = 4.0 * std::hypot(row.w1.mc_error, ref.w1.mc_error) + row.w1.noise_floor + ref.w1.noise_floor;
    EXPECT_LT(std::abs(row.w1.distance - ref.w1.distance), shift + noise);
  }
}
