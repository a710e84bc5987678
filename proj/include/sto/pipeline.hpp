#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sto/clustering.hpp"
#include "sto/config.hpp"
#include "sto/csv.hpp"
#include "sto/discrimination.hpp"
#include "sto/metrics.hpp"
#include "sto/partition.hpp"
#include "sto/score_index.hpp"

namespace sto {

struct PartitionBuild {
  SubgroupPartition partition;
  std::optional<ElbowResult> elbow;
  std::optional<ClusterModel> model;
  std::vector<std::string> warnings;
};

/// Builds the partition a PartitionSpec describes: attribute grouping, or
/// k-means over standardized features with k fixed or chosen by the elbow.
inline PartitionBuild build_partition(const Dataset& dataset, const PartitionSpec& spec) {
  if (spec.attribute) return {partition_by_attribute(dataset, *spec.attribute), {}, {}, {}};
  if (!spec.cluster) throw InvalidArgument("partition spec names neither an attribute nor clustering");
  const auto& cs = *spec.cluster;
  const auto z = standardize(dataset);
  KMeansOptions opt{.k = 2, .seed = cs.seed, .max_iter = cs.max_iter, .tol = cs.tol, .n_init = cs.n_init};
  std::optional<ElbowResult> elbow;
  if (cs.k) {
    opt.k = *cs.k;
  } else {
    elbow = elbow_select_k(z.matrix, cs.k_min, std::min(cs.k_max, z.matrix.rows), cs.seed, opt);
    opt.k = elbow->chosen_k;
    opt.seed = cs.seed + opt.k;
  }
  auto model = kmeans_fit(z.matrix, opt);
  model.standardization = z.params;
  auto assigned = assign_clusters(model, dataset);
  return {std::move(assigned.partition), std::move(elbow), std::move(model),
          std::move(assigned.warnings)};
}

// ---------------------------------------------------------------------------
// What-if evaluation
// ---------------------------------------------------------------------------

/// Parses "0.5" (one global threshold) or "A:0.5,B:0.65" (one per subgroup;
/// every subgroup must be listed exactly once).
inline std::vector<double> parse_thresholds(std::string_view text,
                                            const SubgroupPartition& partition) {
  const auto bad = [](const std::string& m) { return InvalidArgument("thresholds: " + m); };
  text = csv::trim(text);
  if (text.empty()) throw bad("empty");
  std::vector<double> out(partition.subgroup_count(), -1.0);
  if (text.find(':') == std::string_view::npos) {
    const auto v = csv::to_double(text);
    if (!v || !valid_probability(*v)) throw bad("'" + std::string(text) + "' is not a threshold in [0,1]");
    out.assign(out.size(), *v);
    return out;
  }
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = csv::trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    const auto colon = item.rfind(':');
    if (colon == std::string_view::npos) throw bad("expected subgroup:tau, got '" + std::string(item) + "'");
    const auto id = csv::trim(item.substr(0, colon));
    const auto g = partition.index_of(id);
    if (!g) throw bad("unknown subgroup '" + std::string(id) + "'");
    const auto v = csv::to_double(item.substr(colon + 1));
    if (!v || !valid_probability(*v)) throw bad("threshold for '" + std::string(id) + "' not in [0,1]");
    if (out[*g] >= 0.0) throw bad("subgroup '" + std::string(id) + "' listed twice");
    out[*g] = *v;
  }
  for (std::size_t g = 0; g < out.size(); ++g)
    if (out[g] < 0.0) throw bad("no threshold for subgroup '" + partition.subgroup_ids()[g] + "'");
  return out;
}

struct WhatIfSubgroup {
  std::string id;
  double tau = 0.0;
  ConfusionCounts counts;
  std::optional<double> value;
};

struct WhatIfResult {
  UtilityKind utility = UtilityKind::ppv;
  std::vector<WhatIfSubgroup> subgroups;
  ConfusionCounts overall_counts;
  std::optional<double> overall;
  std::optional<std::string> dominant;
  // Against the dominant, keyed by compared subgroup; nullopt when either
  // side is undefined.
  std::map<std::string, std::optional<double>> discrimination;
};

/// Stateless metric evaluation at arbitrary per-subgroup thresholds. The
/// dominant is `dominant` when given, otherwise the argmax at these
/// thresholds (none if any utility is undefined).
inline WhatIfResult what_if(const PartitionIndex& index, const SubgroupPartition& partition,
                            const std::vector<double>& thresholds, UtilityKind kind,
                            std::optional<std::string> dominant = {}) {
  WhatIfResult r;
  r.utility = kind;
  std::vector<SubgroupUtility> su;
  bool all_defined = true;
  for (std::size_t g = 0; g < partition.subgroup_count(); ++g) {
    WhatIfSubgroup s{partition.subgroup_ids()[g], thresholds.at(g), index.counts_at(g, thresholds[g]), {}};
    s.value = try_utility(s.counts, kind);
    all_defined = all_defined && s.value.has_value();
    su.push_back({s.id, s.value, s.counts.predicted_positive()});
    r.subgroups.push_back(std::move(s));
  }
  r.overall_counts = index.pooled_counts(thresholds);
  r.overall = try_utility(r.overall_counts, kind);
  if (dominant) {
    partition.require_index(*dominant);
    r.dominant = dominant;
  } else if (all_defined) {
    r.dominant = find_dominating(su).dominating_subgroup;
  }
  if (r.dominant) {
    const auto& ref = r.subgroups[*partition.index_of(*r.dominant)];
    for (const auto& s : r.subgroups) {
      if (s.id == ref.id) continue;
      r.discrimination[s.id] = (s.value && ref.value)
                                   ? std::optional<double>(discrimination_score(*s.value, *ref.value))
                                   : std::nullopt;
    }
  }
  return r;
}

inline nlohmann::json counts_to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

inline nlohmann::json what_if_to_json(const WhatIfResult& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json subs = nlohmann::json::object();
  for (const auto& s : r.subgroups)
    subs[s.id] = {{"tau", s.tau}, {"value", opt(s.value)}, {"counts", counts_to_json(s.counts)}};
  nlohmann::json disc = nlohmann::json::object();
  for (const auto& [id, v] : r.discrimination) disc[id] = opt(v);
  return {{"utility", std::string(to_string(r.utility))},
          {"overall", {{"value", opt(r.overall)}, {"counts", counts_to_json(r.overall_counts)}}},
          {"subgroups", subs},
          {"dominant", r.dominant ? nlohmann::json(*r.dominant) : nlohmann::json(nullptr)},
          {"discrimination", disc}};
}

inline nlohmann::json partition_summary_json(const PartitionBuild& b) {
  nlohmann::json sizes = nlohmann::json::object();
  for (std::size_t g = 0; g < b.partition.subgroup_count(); ++g)
    sizes[b.partition.subgroup_ids()[g]] = b.partition.sizes()[g];
  nlohmann::json j = {{"subgroups", sizes}, {"order", b.partition.subgroup_ids()}};
  if (b.elbow) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& [k, inertia] : b.elbow->inertia_by_k) curve.push_back({{"k", k}, {"inertia", inertia}});
    j["chosen_k"] = b.elbow->chosen_k;
    j["elbow"] = {{"method", b.elbow->method}, {"curve", curve}};
  }
  if (b.model) j["k"] = b.model->k;
  if (!b.warnings.empty()) j["warnings"] = b.warnings;
  return j;
}

}  // namespace sto
