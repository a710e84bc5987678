#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "sto/errors.hpp"
#include "sto/io.hpp"
#include "sto/optimizer_types.hpp"

namespace sto {

// ---------------------------------------------------------------------------
// Optimizer config  {"tau_base", "grid", "mode", "utility", "aggregate_objective"}
// ---------------------------------------------------------------------------

inline nlohmann::json grid_to_json(const GridSpec& g) {
  switch (g.kind) {
    case GridSpec::Kind::uniform: return {{"uniform", g.step}};
    case GridSpec::Kind::observed_scores: return "observed_scores";
    case GridSpec::Kind::explicit_list: return {{"explicit", g.values}};
  }
  return nullptr;
}

inline double get_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline std::uint64_t get_unsigned(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw ConfigError(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline GridSpec grid_from_json(const nlohmann::json& j, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "observed_scores") return GridSpec::observed_scores();
    throw ConfigError(path, "expected \"observed_scores\", {\"uniform\": step} or {\"explicit\": [...]}");
  }
  detail::require_object(j, path, {"uniform", "explicit"});
  if (j.size() != 1) throw ConfigError(path, "exactly one of 'uniform' or 'explicit' is required");
  if (j.contains("uniform")) return GridSpec::uniform(get_number(j["uniform"], path + ".uniform"));
  const auto& list = j["explicit"];
  if (!list.is_array()) throw ConfigError(path + ".explicit", "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < list.size(); ++i)
    v.push_back(get_number(list[i], path + ".explicit[" + std::to_string(i) + "]"));
  return GridSpec::explicit_list(std::move(v));
}

inline nlohmann::json optimizer_config_to_json(const OptimizerConfig& c) {
  return {{"tau_base", c.tau_base},
          {"grid", grid_to_json(c.grid)},
          {"mode", std::string(to_string(c.mode))},
          {"utility", std::string(to_string(c.utility))},
          {"aggregate_objective", std::string(to_string(c.aggregate))}};
}

/// Missing keys take their defaults. Validates the result; errors carry the
/// offending path rooted at `path`.
inline OptimizerConfig optimizer_config_from_json(const nlohmann::json& j,
                                                  const std::string& path = "$") {
  detail::require_object(j, path, {"tau_base", "grid", "mode", "utility", "aggregate_objective"});
  OptimizerConfig c;
  if (j.contains("tau_base")) c.tau_base = get_number(j["tau_base"], path + ".tau_base");
  if (j.contains("grid")) c.grid = grid_from_json(j["grid"], path + ".grid");
  if (j.contains("mode")) {
    const auto m = detail::get_string(j["mode"], path + ".mode");
    if (m == "fixed_dominant")
      c.mode = DominantMode::fixed_dominant;
    else if (m == "free_dominant")
      c.mode = DominantMode::free_dominant;
    else
      throw ConfigError(path + ".mode", "expected fixed_dominant or free_dominant");
  }
  if (j.contains("utility")) {
    const auto u = parse_utility_kind(detail::get_string(j["utility"], path + ".utility"));
    if (!u) throw ConfigError(path + ".utility", "expected PPV, NPV, TPR or ACCURACY");
    c.utility = *u;
  }
  if (j.contains("aggregate_objective")) {
    const auto a = detail::get_string(j["aggregate_objective"], path + ".aggregate_objective");
    if (a == "max_gap")
      c.aggregate = AggregateObjective::max_gap;
    else if (a == "sum_gap")
      c.aggregate = AggregateObjective::sum_gap;
    else
      throw ConfigError(path + ".aggregate_objective", "expected max_gap or sum_gap");
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    // validate() reports paths relative to the optimizer object.
    throw ConfigError(path + e.path().substr(1), std::string(e.what()).substr(e.path().size() + 2));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Partition spec  {"attribute": name} | {"cluster": {...}}
// ---------------------------------------------------------------------------

struct ClusterSpec {
  std::optional<std::size_t> k;  // nullopt: choose by elbow over [k_min, k_max]
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double tol = 1e-6;
  std::size_t n_init = 10;

  bool operator==(const ClusterSpec&) const = default;
};

struct PartitionSpec {
  std::optional<std::string> attribute;
  std::optional<ClusterSpec> cluster;

  bool operator==(const PartitionSpec&) const = default;
};

inline PartitionSpec partition_spec_from_json(const nlohmann::json& j, const std::string& path,
                                              std::optional<std::uint64_t> default_seed = {}) {
  detail::require_object(j, path, {"attribute", "cluster"});
  if (j.size() != 1) throw ConfigError(path, "exactly one of 'attribute' or 'cluster' is required");
  PartitionSpec spec;
  if (j.contains("attribute")) {
    spec.attribute = detail::get_string(j["attribute"], path + ".attribute");
    return spec;
  }
  const auto& c = j["cluster"];
  const std::string cp = path + ".cluster";
  detail::require_object(c, cp, {"k", "range", "seed", "max_iter", "tol", "n_init"});
  ClusterSpec cs;
  if (default_seed) cs.seed = *default_seed;
  if (c.contains("k")) {
    if (c["k"].is_string()) {
      if (c["k"].get<std::string>() != "auto") throw ConfigError(cp + ".k", "expected \"auto\" or an integer");
    } else {
      cs.k = get_unsigned(c["k"], cp + ".k");
      if (*cs.k < 2) throw ConfigError(cp + ".k", "must be at least 2");
    }
  }
  if (c.contains("range")) {
    const auto& r = c["range"];
    if (!r.is_array() || r.size() != 2) throw ConfigError(cp + ".range", "expected [k_min, k_max]");
    cs.k_min = get_unsigned(r[0], cp + ".range[0]");
    cs.k_max = get_unsigned(r[1], cp + ".range[1]");
    if (cs.k_min < 2 || cs.k_max < cs.k_min + 2)
      throw ConfigError(cp + ".range", "need 2 <= k_min and at least 3 values in the range");
  }
  if (c.contains("seed")) cs.seed = get_unsigned(c["seed"], cp + ".seed");
  if (c.contains("max_iter")) cs.max_iter = get_unsigned(c["max_iter"], cp + ".max_iter");
  if (c.contains("tol")) cs.tol = get_number(c["tol"], cp + ".tol");
  if (c.contains("n_init")) cs.n_init = get_unsigned(c["n_init"], cp + ".n_init");
  if (cs.max_iter == 0) throw ConfigError(cp + ".max_iter", "must be positive");
  if (!(cs.tol >= 0.0)) throw ConfigError(cp + ".tol", "must be non-negative");
  spec.cluster = cs;
  return spec;
}

// ---------------------------------------------------------------------------
// Run config (CLI `optimize --config`)
// ---------------------------------------------------------------------------

struct RunConfig {
  std::filesystem::path dataset;
  Manifest manifest;
  PartitionSpec partition;
  OptimizerConfig optimizer;
  std::filesystem::path report_json;
  std::filesystem::path report_table;
  std::filesystem::path partition_out;
  std::uint64_t seed = 0;
  std::size_t max_rows = 1'000'000;
};

/// Relative paths inside the document resolve against `base_dir`.
inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {}) {
  detail::require_object(j, "$",
                         {"dataset", "manifest", "partition", "optimizer", "output", "seed",
                          "max_rows"});
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  RunConfig rc;
  if (!j.contains("dataset")) throw ConfigError("$.dataset", "required");
  rc.dataset = resolve(detail::get_string(j["dataset"], "$.dataset"));
  if (!j.contains("manifest")) throw ConfigError("$.manifest", "required");
  if (j["manifest"].is_string())
    rc.manifest = load_manifest(resolve(j["manifest"].get<std::string>()));
  else
    rc.manifest = manifest_from_json(j["manifest"], "$.manifest");
  if (j.contains("seed")) rc.seed = get_unsigned(j["seed"], "$.seed");
  if (j.contains("max_rows")) rc.max_rows = get_unsigned(j["max_rows"], "$.max_rows");
  if (!j.contains("partition")) throw ConfigError("$.partition", "required");
  rc.partition = partition_spec_from_json(j["partition"], "$.partition", rc.seed);
  if (j.contains("optimizer")) rc.optimizer = optimizer_config_from_json(j["optimizer"], "$.optimizer");
  if (j.contains("output")) {
    const auto& o = j["output"];
    detail::require_object(o, "$.output", {"json", "table", "partition"});
    if (o.contains("json")) rc.report_json = resolve(detail::get_string(o["json"], "$.output.json"));
    if (o.contains("table")) rc.report_table = resolve(detail::get_string(o["table"], "$.output.table"));
    if (o.contains("partition"))
      rc.partition_out = resolve(detail::get_string(o["partition"], "$.output.partition"));
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", std::string("not valid JSON: ") + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

}  // namespace sto
