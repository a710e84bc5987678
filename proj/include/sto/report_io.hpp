#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sto/config.hpp"
#include "sto/errors.hpp"
#include "sto/io.hpp"
#include "sto/optimizer_types.hpp"

namespace sto {

enum class ReportFormat { json, table };

namespace detail {

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw ReportError("report is incomplete: " + what + " is undefined");
}

inline void check_complete(const OptimizationReport& r) {
  require_finite(r.baseline_overall, "baseline overall utility");
  require_finite(r.adjusted_overall, "adjusted overall utility");
  for (const auto& id : r.subgroups) {
    auto b = r.baseline_utility.find(id);
    auto a = r.adjusted_utility.find(id);
    if (b == r.baseline_utility.end() || a == r.adjusted_utility.end())
      throw ReportError("report is incomplete: no utility for subgroup '" + id + "'");
    require_finite(b->second, "baseline utility of '" + id + "'");
    require_finite(a->second, "adjusted utility of '" + id + "'");
    require_finite(r.assignment.at(id), "threshold of '" + id + "'");
  }
  for (const auto& [id, v] : r.discrimination_before) require_finite(v, "discrimination of '" + id + "'");
  for (const auto& [id, v] : r.discrimination_after) require_finite(v, "discrimination of '" + id + "'");
}

inline nlohmann::json difference_to_json(const Difference& d) {
  return {{"baseline", d.baseline},
          {"adjusted", d.adjusted},
          {"net", d.net},
          {"pct", d.pct ? nlohmann::json(*d.pct) : nlohmann::json(nullptr)}};
}

inline Difference difference_from_json(const nlohmann::json& j) {
  Difference d{j.at("baseline").get<double>(), j.at("adjusted").get<double>(),
               j.at("net").get<double>(), std::nullopt};
  if (!j.at("pct").is_null()) d.pct = j.at("pct").get<double>();
  return d;
}

}  // namespace detail

/// Stable JSON form: object keys sorted, doubles printed round-trip exact.
inline nlohmann::json report_to_json(const OptimizationReport& r) {
  detail::check_complete(r);
  nlohmann::json j;
  j["schema_version"] = std::string(OptimizationReport::kSchemaVersion);
  j["config"] = optimizer_config_to_json(r.config);
  j["subgroups"] = r.subgroups;
  j["baseline"] = {{"overall", r.baseline_overall}, {"per_subgroup", r.baseline_utility}};
  j["dominating"] = {{"subgroup", r.dominating}, {"tie_broken", r.tie_broken}};
  j["assignment"] = {{"tau_base", r.assignment.tau_base}, {"per_subgroup", r.assignment.per_subgroup}};
  j["adjusted"] = {{"overall", r.adjusted_overall}, {"per_subgroup", r.adjusted_utility}};
  j["discrimination"] = {{"before", r.discrimination_before}, {"after", r.discrimination_after}};
  nlohmann::json util = nlohmann::json::object(), disc = nlohmann::json::object();
  for (const auto& [id, d] : r.utility_diff) util[id] = detail::difference_to_json(d);
  for (const auto& [id, d] : r.discrimination_diff) disc[id] = detail::difference_to_json(d);
  j["differences"] = {{"overall", detail::difference_to_json(r.overall_diff)},
                      {"per_subgroup", util},
                      {"discrimination", disc}};
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.validation.checks)
    checks.push_back({{"name", c.name}, {"subgroup", c.subgroup}, {"passed", c.passed},
                      {"detail", c.detail}});
  j["validation"] = {{"feasible", r.validation.feasible()}, {"checks", checks}};
  return j;
}

inline std::string report_json_string(const OptimizationReport& r) {
  return report_to_json(r).dump(2) + "\n";
}

/// Inverse of report_to_json(). Rejects documents whose schema major
/// version differs from this reader's.
inline OptimizationReport report_from_json(const nlohmann::json& j) {
  const auto version = j.at("schema_version").get<std::string>();
  const auto major = [](std::string_view v) { return v.substr(0, v.find('.')); };
  if (major(version) != major(OptimizationReport::kSchemaVersion))
    throw ReportError("unsupported report schema version " + version);
  try {
    OptimizationReport r;
    r.config = optimizer_config_from_json(j.at("config"), "$.config");
    r.subgroups = j.at("subgroups").get<std::vector<std::string>>();
    r.baseline_overall = j.at("baseline").at("overall").get<double>();
    r.baseline_utility = j.at("baseline").at("per_subgroup").get<std::map<std::string, double>>();
    r.dominating = j.at("dominating").at("subgroup").get<std::string>();
    r.tie_broken = j.at("dominating").at("tie_broken").get<bool>();
    r.assignment.tau_base = j.at("assignment").at("tau_base").get<double>();
    r.assignment.per_subgroup =
        j.at("assignment").at("per_subgroup").get<std::map<std::string, double>>();
    r.adjusted_overall = j.at("adjusted").at("overall").get<double>();
    r.adjusted_utility = j.at("adjusted").at("per_subgroup").get<std::map<std::string, double>>();
    r.discrimination_before =
        j.at("discrimination").at("before").get<std::map<std::string, double>>();
    r.discrimination_after = j.at("discrimination").at("after").get<std::map<std::string, double>>();
    const auto& d = j.at("differences");
    r.overall_diff = detail::difference_from_json(d.at("overall"));
    for (const auto& [id, v] : d.at("per_subgroup").items())
      r.utility_diff[id] = detail::difference_from_json(v);
    for (const auto& [id, v] : d.at("discrimination").items())
      r.discrimination_diff[id] = detail::difference_from_json(v);
    for (const auto& c : j.at("validation").at("checks"))
      r.validation.checks.push_back({c.at("name").get<std::string>(),
                                     c.at("subgroup").get<std::string>(), c.at("passed").get<bool>(),
                                     c.at("detail").get<std::string>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Table rendering
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline std::string signed4(double v) {
  char buf[32];
  // Avoid printing "-0.0000" for tiny negative noise.
  if (std::abs(v) < 5e-5) v = 0.0;
  std::snprintf(buf, sizeof buf, "%+.4f", v);
  return buf;
}

inline std::string percent1(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  double x = *v * 100.0;
  if (std::abs(x) < 0.05) x = 0.0;
  std::snprintf(buf, sizeof buf, "%+.1f%%", x);
  return buf;
}

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.resize(c + 1, 0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      line += row[c];
      if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace detail

/// Before/after results table. Columns: row label, threshold, overall
/// utility, one utility column per subgroup (dominant marked with '*'),
/// then D against the dominant before/after with its net and percent change.
/// Rows: Baseline, one tau_adj row per subgroup, Adj., Net Diff., % Diff.
inline std::string render_report_table(const OptimizationReport& r) {
  detail::check_complete(r);
  using detail::fixed4;
  using detail::percent1;
  using detail::signed4;
  const std::string u(to_string(r.config.utility));
  const std::size_t n = r.subgroups.size();
  const std::size_t cols = 3 + n + 4;

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"", "tau", u + "_all"};
  for (const auto& id : r.subgroups) head.push_back(u + "_" + id + (id == r.dominating ? "*" : ""));
  head.insert(head.end(), {"D_" + r.dominating + ",i", "D*_" + r.dominating + ",i", "Diff.", "% Diff."});
  rows.push_back(head);

  std::vector<std::string> base{"Baseline", fixed4(r.config.tau_base), fixed4(r.baseline_overall)};
  for (const auto& id : r.subgroups) base.push_back(fixed4(r.baseline_utility.at(id)));
  base.resize(cols);
  rows.push_back(base);

  for (std::size_t g = 0; g < n; ++g) {
    const auto& id = r.subgroups[g];
    std::vector<std::string> row(cols);
    row[0] = "tau_adj," + id;
    row[1] = fixed4(r.assignment.at(id));
    row[3 + g] = fixed4(r.adjusted_utility.at(id));
    if (id == r.dominating) {
      row[3 + n] = "-";
      row[4 + n] = "-";
    } else {
      const auto& d = r.discrimination_diff.at(id);
      row[3 + n] = fixed4(d.baseline);
      row[4 + n] = fixed4(d.adjusted);
      row[5 + n] = signed4(d.net);
      row[6 + n] = percent1(d.pct);
    }
    rows.push_back(row);
  }

  std::vector<std::string> adj{"Adj. " + u, "", fixed4(r.adjusted_overall)};
  std::vector<std::string> net{"Net Diff.", "", signed4(r.overall_diff.net)};
  std::vector<std::string> pct{"% Diff.", "", percent1(r.overall_diff.pct)};
  for (const auto& id : r.subgroups) {
    adj.push_back(fixed4(r.adjusted_utility.at(id)));
    net.push_back(signed4(r.utility_diff.at(id).net));
    pct.push_back(percent1(r.utility_diff.at(id).pct));
  }
  adj.resize(cols);
  net.resize(cols);
  pct.resize(cols);
  rows.insert(rows.end(), {adj, net, pct});

  std::string out = "mode: " + std::string(to_string(r.config.mode)) + "  utility: " + u +
                    "  dominating: " + r.dominating + (r.tie_broken ? " (tie broken)" : "") + "\n";
  out += detail::render_rows(rows);
  std::size_t failed = 0;
  for (const auto& c : r.validation.checks) failed += c.passed ? 0 : 1;
  out += "validation: " +
         (failed == 0 ? std::string("all ") + std::to_string(r.validation.checks.size()) +
                            " constraint checks passed"
                      : std::to_string(failed) + " of " +
                            std::to_string(r.validation.checks.size()) + " constraint checks FAILED") +
         "\n";
  for (const auto& c : r.validation.checks)
    if (!c.passed) out += "  failed " + c.name + (c.subgroup.empty() ? "" : " [" + c.subgroup + "]") +
                          ": " + c.detail + "\n";
  out += "note: % Diff. is Net Diff. divided by the baseline value of the same quantity.\n";
  return out;
}

inline std::string render_report(const OptimizationReport& r, ReportFormat format) {
  return format == ReportFormat::json ? report_json_string(r) : render_report_table(r);
}

inline void write_report(const OptimizationReport& r, const std::filesystem::path& path,
                         ReportFormat format) {
  detail::write_file(path, render_report(r, format));
}

}  // namespace sto
