#pragma once

// Tabular study output: named columns of doubles, a scalar summary, and
// string tags. CSV carries the summary and tags as leading "# key=value"
// lines; JSON round-trips exactly (non-finite numbers are written as null
// and read back as NaN).

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "seqclt/errors.hpp"

namespace seqclt {

struct Report {
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;
  std::map<std::string, std::string> tags;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw ConstraintError("Report: no column '" + name + "'");
  }

  std::vector<double> values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }

  bool operator==(const Report& o) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json number_to_json(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace detail

inline std::string report_to_csv(const Report& r) {
  std::ostringstream os;
  if (!r.kind.empty()) os << "# kind=" << r.kind << "\n";
  for (const auto& [k, v] : r.tags) os << "# " << k << "=" << v << "\n";
  for (const auto& [k, v] : r.summary) os << "# " << k << "=" << detail::format_double(v) << "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::format_double(row[i]);
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json report_to_json(const Report& r) {
  nlohmann::json j;
  j["kind"] = r.kind;
  j["columns"] = r.columns;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const double v : row) jr.push_back(detail::number_to_json(v));
    rows.push_back(std::move(jr));
  }
  j["rows"] = std::move(rows);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& [k, v] : r.summary) summary[k] = detail::number_to_json(v);
  j["summary"] = std::move(summary);
  j["tags"] = r.tags;
  return j;
}

inline Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rows")) {
      std::vector<double> row;
      for (const auto& v : jr) row.push_back(detail::number_from_json(v));
      r.rows.push_back(std::move(row));
    }
    for (const auto& [k, v] : j.at("summary").items()) r.summary[k] = detail::number_from_json(v);
    r.tags = j.at("tags").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

enum class ReportFormat { Csv, Json };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + s + "' (expected csv or json)");
}

inline std::string render_report(const Report& r, ReportFormat format) {
  return format == ReportFormat::Csv ? report_to_csv(r) : report_to_json(r).dump(2) + "\n";
}

inline void emit_report(const Report& r, const std::string& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << render_report(r, format);
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

inline Report read_json_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("cannot parse ") + path + ": " + e.what());
  }
}

}  // namespace seqclt
