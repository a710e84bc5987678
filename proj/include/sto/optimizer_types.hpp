#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sto/errors.hpp"
#include "sto/metrics.hpp"

namespace sto {

enum class DominantMode { fixed_dominant, free_dominant };
enum class AggregateObjective { max_gap, sum_gap };

inline std::string_view to_string(DominantMode m) noexcept {
  return m == DominantMode::fixed_dominant ? "fixed_dominant" : "free_dominant";
}
inline std::string_view to_string(AggregateObjective a) noexcept {
  return a == AggregateObjective::max_gap ? "max_gap" : "sum_gap";
}

/// Where candidate thresholds come from.
struct GridSpec {
  enum class Kind { uniform, observed_scores, explicit_list };
  Kind kind = Kind::uniform;
  double step = 0.05;
  std::vector<double> values;

  static GridSpec uniform(double step) { return {Kind::uniform, step, {}}; }
  static GridSpec observed_scores() { return {Kind::observed_scores, 0.0, {}}; }
  static GridSpec explicit_list(std::vector<double> v) {
    return {Kind::explicit_list, 0.0, std::move(v)};
  }

  bool operator==(const GridSpec&) const = default;
};

struct OptimizerConfig {
  double tau_base = 0.5;
  GridSpec grid = GridSpec::uniform(0.05);
  DominantMode mode = DominantMode::fixed_dominant;
  UtilityKind utility = UtilityKind::ppv;
  AggregateObjective aggregate = AggregateObjective::max_gap;

  /// Throws ConfigError with a `$.`-rooted path on the first violation.
  void validate() const {
    if (!valid_probability(tau_base)) throw ConfigError("$.tau_base", "must lie in [0, 1]");
    switch (grid.kind) {
      case GridSpec::Kind::uniform:
        if (!(grid.step > 0.0) || grid.step > 0.5)
          throw ConfigError("$.grid.uniform", "step must satisfy 0 < step <= 0.5");
        break;
      case GridSpec::Kind::observed_scores: break;
      case GridSpec::Kind::explicit_list:
        if (grid.values.empty()) throw ConfigError("$.grid.explicit", "must not be empty");
        for (std::size_t i = 0; i < grid.values.size(); ++i) {
          if (!valid_probability(grid.values[i]))
            throw ConfigError("$.grid.explicit[" + std::to_string(i) + "]", "must lie in [0, 1]");
          if (i > 0 && !(grid.values[i] > grid.values[i - 1]))
            throw ConfigError("$.grid.explicit[" + std::to_string(i) + "]",
                              "values must be strictly increasing");
        }
        break;
    }
  }

  bool operator==(const OptimizerConfig&) const = default;
};

struct ThresholdAssignment {
  std::map<std::string, double> per_subgroup;
  double tau_base = 0.5;

  double at(const std::string& subgroup) const {
    auto it = per_subgroup.find(subgroup);
    if (it == per_subgroup.end())
      throw InvalidArgument("no threshold for subgroup '" + subgroup + "'");
    return it->second;
  }

  bool operator==(const ThresholdAssignment&) const = default;
};

/// Baseline vs. adjusted value of one reported quantity. `pct` is
/// net / baseline and is absent when the baseline is zero.
struct Difference {
  double baseline = 0.0;
  double adjusted = 0.0;
  double net = 0.0;
  std::optional<double> pct;

  bool operator==(const Difference&) const = default;
};

inline Difference difference(double baseline, double adjusted) {
  Difference d{baseline, adjusted, adjusted - baseline, std::nullopt};
  if (baseline != 0.0) d.pct = d.net / baseline;
  return d;
}

struct ConstraintCheck {
  std::string name;      // subgroup_bounds | pooled_non_decreasing | dominant_non_decreasing
  std::string subgroup;  // empty for dataset-level checks
  bool passed = false;
  std::string detail;

  bool operator==(const ConstraintCheck&) const = default;
};

struct ValidationVerdict {
  std::vector<ConstraintCheck> checks;

  bool feasible() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  bool operator==(const ValidationVerdict&) const = default;
};

/// Everything a run produces, laid out like a before/after results table:
/// baseline utilities, the dominating subgroup, chosen thresholds, adjusted
/// utilities, discrimination against the dominant before and after, and the
/// differences between them.
struct OptimizationReport {
  static constexpr std::string_view kSchemaVersion = "1.0";

  OptimizerConfig config;
  std::vector<std::string> subgroups;

  std::map<std::string, double> baseline_utility;
  double baseline_overall = 0.0;

  std::string dominating;
  bool tie_broken = false;

  ThresholdAssignment assignment;

  std::map<std::string, double> adjusted_utility;
  double adjusted_overall = 0.0;

  // Keyed by compared (non-dominating) subgroup.
  std::map<std::string, double> discrimination_before;
  std::map<std::string, double> discrimination_after;

  Difference overall_diff;
  std::map<std::string, Difference> utility_diff;
  std::map<std::string, Difference> discrimination_diff;

  ValidationVerdict validation;

  bool feasible() const { return validation.feasible(); }

  bool operator==(const OptimizationReport&) const = default;
};

/// Fills the *_diff fields from the baseline/adjusted/discrimination fields.
inline void compute_differences(OptimizationReport& r) {
  r.overall_diff = difference(r.baseline_overall, r.adjusted_overall);
  r.utility_diff.clear();
  for (const auto& [id, base] : r.baseline_utility) {
    auto it = r.adjusted_utility.find(id);
    if (it == r.adjusted_utility.end())
      throw ReportError("no adjusted utility for subgroup '" + id + "'");
    r.utility_diff[id] = difference(base, it->second);
  }
  r.discrimination_diff.clear();
  for (const auto& [id, before] : r.discrimination_before) {
    auto it = r.discrimination_after.find(id);
    if (it == r.discrimination_after.end())
      throw ReportError("no adjusted discrimination score for subgroup '" + id + "'");
    r.discrimination_diff[id] = difference(before, it->second);
  }
}

}  // namespace sto
