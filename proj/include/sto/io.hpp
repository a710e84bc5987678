#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sto/clustering.hpp"
#include "sto/csv.hpp"
#include "sto/dataset.hpp"
#include "sto/errors.hpp"
#include "sto/subgroups.hpp"

namespace sto {

/// Column roles for a dataset CSV. Numeric feature columns are used as-is;
/// categorical feature columns are one-hot expanded into `name=value`
/// columns (values sorted) after the numeric ones.
struct Manifest {
  std::string id = "id";
  std::string score = "score";
  std::string label = "label";
  std::string attribute;  // optional group column
  std::vector<std::string> features;
  std::vector<std::string> categorical;

  bool operator==(const Manifest&) const = default;
};

namespace detail {

inline void require_object(const nlohmann::json& j, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(path + "." + key, "unknown key");
}

inline std::string get_string(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

inline std::vector<std::string> get_string_list(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_string(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline Manifest manifest_from_json(const nlohmann::json& j, const std::string& path = "$") {
  detail::require_object(j, path, {"id", "score", "label", "attribute", "features", "categorical"});
  Manifest m;
  if (j.contains("id")) m.id = detail::get_string(j["id"], path + ".id");
  if (j.contains("score")) m.score = detail::get_string(j["score"], path + ".score");
  if (j.contains("label")) m.label = detail::get_string(j["label"], path + ".label");
  if (j.contains("attribute")) m.attribute = detail::get_string(j["attribute"], path + ".attribute");
  if (j.contains("features")) m.features = detail::get_string_list(j["features"], path + ".features");
  if (j.contains("categorical"))
    m.categorical = detail::get_string_list(j["categorical"], path + ".categorical");
  return m;
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j = {{"id", m.id}, {"score", m.score}, {"label", m.label}};
  if (!m.attribute.empty()) j["attribute"] = m.attribute;
  if (!m.features.empty()) j["features"] = m.features;
  if (!m.categorical.empty()) j["categorical"] = m.categorical;
  return j;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("$", std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

struct LoadOptions {
  std::size_t max_rows = 1'000'000;
};

/// Parses and validates a dataset CSV. Errors cite the 1-based data row and
/// the column name.
inline Dataset load_dataset_text(std::string_view text, const Manifest& manifest,
                                 const LoadOptions& options = {}) {
  const auto records = csv::parse(text);
  if (records.empty()) throw EmptyInput("dataset file is empty");
  const auto& header = records.front().fields;
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto name = std::string(csv::trim(header[i]));
    if (!col.emplace(name, i).second) throw ParseError("duplicate column '" + name + "'", 0, name);
  }
  auto column = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw ParseError("missing column '" + name + "'", 0, name);
    return it->second;
  };
  const std::size_t c_id = column(manifest.id);
  const std::size_t c_score = column(manifest.score);
  const std::size_t c_label = column(manifest.label);
  const std::size_t c_attr = manifest.attribute.empty() ? 0 : column(manifest.attribute);
  std::vector<std::size_t> c_num, c_cat;
  for (const auto& f : manifest.features) c_num.push_back(column(f));
  for (const auto& f : manifest.categorical) c_cat.push_back(column(f));

  const std::size_t rows = records.size() - 1;
  if (rows == 0) throw EmptyInput("dataset has a header but no rows");
  if (rows > options.max_rows)
    throw InvalidArgument("dataset has " + std::to_string(rows) + " rows; limit is " +
                          std::to_string(options.max_rows));

  // Categorical vocabularies first so every row gets the same one-hot width.
  std::vector<std::set<std::string>> vocab(c_cat.size());
  for (std::size_t r = 1; r < records.size(); ++r)
    for (std::size_t j = 0; j < c_cat.size(); ++j)
      if (c_cat[j] < records[r].fields.size()) {
        auto v = std::string(csv::trim(records[r].fields[c_cat[j]]));
        if (!v.empty()) vocab[j].insert(std::move(v));
      }

  Dataset ds;
  ds.attribute_name = manifest.attribute;
  ds.feature_names = manifest.features;
  for (std::size_t j = 0; j < c_cat.size(); ++j)
    for (const auto& v : vocab[j]) ds.feature_names.push_back(manifest.categorical[j] + "=" + v);
  const bool has_features = !ds.feature_names.empty();

  std::unordered_map<std::string, std::size_t> first_row;
  ds.instances.reserve(rows);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != header.size())
      throw ParseError("row " + std::to_string(r) + " has " + std::to_string(f.size()) +
                           " fields, header has " + std::to_string(header.size()),
                       r, "");
    ScoredInstance inst;
    inst.id = std::string(csv::trim(f[c_id]));
    if (inst.id.empty()) throw ParseError("row " + std::to_string(r) + ": empty id", r, manifest.id);
    if (auto [it, fresh] = first_row.emplace(inst.id, r); !fresh)
      throw ParseError("duplicate id '" + inst.id + "' at rows " + std::to_string(it->second) +
                           " and " + std::to_string(r),
                       r, manifest.id);

    const auto score = csv::to_double(f[c_score]);
    if (!score)
      throw ParseError("row " + std::to_string(r) + ", column " + manifest.score + ": '" +
                           f[c_score] + "' is not a number",
                       r, manifest.score);
    if (!valid_probability(*score))
      throw ParseError("row " + std::to_string(r) + ", column " + manifest.score + ": " +
                           f[c_score] + " is outside [0,1]",
                       r, manifest.score);
    inst.score = *score;

    const auto label = csv::trim(f[c_label]);
    if (label == "0")
      inst.label = 0;
    else if (label == "1")
      inst.label = 1;
    else
      throw ParseError("row " + std::to_string(r) + ", column " + manifest.label + ": '" +
                           std::string(label) + "' is not a binary label",
                       r, manifest.label);

    if (!manifest.attribute.empty()) {
      auto a = std::string(csv::trim(f[c_attr]));
      if (!a.empty()) inst.attribute = std::move(a);
    }

    if (has_features) {
      inst.features.reserve(ds.feature_names.size());
      for (std::size_t j = 0; j < c_num.size(); ++j) {
        const auto cell = csv::trim(f[c_num[j]]);
        if (cell.empty()) {
          inst.features.push_back(std::numeric_limits<double>::quiet_NaN());
          continue;
        }
        const auto v = csv::to_double(cell);
        if (!v || !std::isfinite(*v))
          throw ParseError("row " + std::to_string(r) + ", column " + manifest.features[j] + ": '" +
                               std::string(cell) + "' is not a finite number",
                           r, manifest.features[j]);
        inst.features.push_back(*v);
      }
      for (std::size_t j = 0; j < c_cat.size(); ++j) {
        const auto cell = std::string(csv::trim(f[c_cat[j]]));
        for (const auto& v : vocab[j])
          inst.features.push_back(cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : (cell == v ? 1.0 : 0.0));
      }
    }
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path, const Manifest& manifest,
                            const LoadOptions& options = {}) {
  return load_dataset_text(detail::read_file(path), manifest, options);
}

/// Manifest describing write_dataset_csv() output: every feature (including
/// one-hot columns) becomes a numeric column.
inline Manifest manifest_for(const Dataset& ds) {
  Manifest m;
  m.attribute = ds.attribute_name;
  m.features = ds.feature_names;
  return m;
}

/// Serializes with shortest exact decimals so that loading the result with
/// manifest_for(ds) reproduces every value bit for bit.
inline std::string write_dataset_csv(const Dataset& ds) {
  std::string out = "id,score,label";
  if (!ds.attribute_name.empty()) out += "," + csv::escape(ds.attribute_name);
  for (const auto& f : ds.feature_names) out += "," + csv::escape(f);
  out += "\n";
  for (const auto& inst : ds.instances) {
    out += csv::escape(inst.id) + "," + csv::exact_decimal(inst.score) + "," +
           std::to_string(inst.label);
    if (!ds.attribute_name.empty()) out += "," + csv::escape(inst.attribute.value_or(""));
    for (std::size_t j = 0; j < ds.feature_names.size(); ++j) {
      out += ",";
      if (j < inst.features.size() && !std::isnan(inst.features[j]))
        out += csv::exact_decimal(inst.features[j]);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Partition and elbow files
// ---------------------------------------------------------------------------

inline std::string write_partition_csv(const SubgroupPartition& p) {
  std::string out = "id,subgroup\n";
  for (std::size_t i = 0; i < p.instance_count(); ++i)
    out += csv::escape(p.instance_ids()[i]) + "," + csv::escape(p.subgroup_ids()[p.subgroup_of(i)]) +
           "\n";
  return out;
}

inline std::map<std::string, std::string> read_partition_csv(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty() || records.front().fields.size() != 2)
    throw ParseError("partition file needs header 'id,subgroup'", 0, "");
  std::map<std::string, std::string> out;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != 2) throw ParseError("row " + std::to_string(r) + ": expected 2 fields", r, "");
    if (!out.emplace(f[0], f[1]).second)
      throw ParseError("duplicate id '" + f[0] + "' in partition file", r, "id");
  }
  return out;
}

inline std::string write_elbow_csv(const ElbowResult& e) {
  std::string out = "k,inertia,chosen\n";
  for (const auto& [k, inertia] : e.inertia_by_k)
    out += std::to_string(k) + "," + csv::exact_decimal(inertia) + "," +
           (k == e.chosen_k ? "1" : "0") + "\n";
  return out;
}

}  // namespace sto
