#pragma once

#include <map>
#include <string>
#include <vector>

#include "sto/dataset.hpp"
#include "sto/errors.hpp"
#include "sto/subgroups.hpp"

namespace sto {

/// One subgroup per distinct value of the dataset's attribute column, ordered
/// lexicographically by value.
inline SubgroupPartition partition_by_attribute(const Dataset& dataset,
                                                const std::string& attribute_name) {
  if (dataset.empty()) throw EmptyInput("partition_by_attribute: empty dataset");
  if (dataset.attribute_name.empty() || dataset.attribute_name != attribute_name)
    throw PartitionError("dataset has no attribute column named '" + attribute_name + "'");

  std::vector<std::string> missing;
  std::map<std::string, std::size_t> index;
  for (const auto& inst : dataset.instances) {
    if (!inst.attribute || inst.attribute->empty())
      missing.push_back(inst.id);
    else
      index.emplace(*inst.attribute, 0);
  }
  if (!missing.empty()) {
    std::string msg = "missing '" + attribute_name + "' value for instance(s):";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw PartitionError(msg);
  }
  if (index.size() < 2)
    throw PartitionError("attribute '" + attribute_name +
                         "' has a single distinct value; nothing to compare");

  std::vector<std::string> ids;
  for (auto& [value, pos] : index) {
    pos = ids.size();
    ids.push_back(value);
  }
  std::vector<std::size_t> membership;
  std::vector<std::string> instance_ids;
  membership.reserve(dataset.size());
  instance_ids.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    membership.push_back(index.at(*inst.attribute));
    instance_ids.push_back(inst.id);
  }
  return SubgroupPartition(std::move(ids), std::move(membership), std::move(instance_ids),
                           AttributeSource{attribute_name});
}

}  // namespace sto
