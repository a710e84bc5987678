#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sto/dataset.hpp"
#include "sto/errors.hpp"

namespace sto {

struct AttributeSource {
  std::string name;
  bool operator==(const AttributeSource&) const = default;
};

struct ClusterSource {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double inertia = 0.0;
  bool operator==(const ClusterSource&) const = default;
};

using PartitionSource = std::variant<AttributeSource, ClusterSource>;

/// Disjoint, exhaustive assignment of a dataset's instances to subgroups.
///
/// Membership is stored positionally: `subgroup_of(i)` is the subgroup index
/// of the dataset's i-th instance. The instance ids are kept so a partition
/// can be checked against (and serialized independently of) its dataset.
class SubgroupPartition {
public:
  SubgroupPartition(std::vector<std::string> subgroup_ids,
                    std::vector<std::size_t> membership,
                    std::vector<std::string> instance_ids,
                    PartitionSource source)
      : ids_(std::move(subgroup_ids)),
        membership_(std::move(membership)),
        instance_ids_(std::move(instance_ids)),
        source_(std::move(source)) {
    if (membership_.size() != instance_ids_.size())
      throw PartitionError("membership and instance id lists differ in length");
    if (ids_.size() < 2)
      throw PartitionError("a partition needs at least 2 subgroups, got " +
                           std::to_string(ids_.size()));
    std::vector<std::string> sorted = ids_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw PartitionError("duplicate subgroup id");
    sizes_.assign(ids_.size(), 0);
    for (std::size_t g : membership_) {
      if (g >= ids_.size()) throw PartitionError("membership index out of range");
      ++sizes_[g];
    }
    for (std::size_t g = 0; g < ids_.size(); ++g)
      if (sizes_[g] == 0) throw PartitionError("subgroup '" + ids_[g] + "' is empty");
  }

  const std::vector<std::string>& subgroup_ids() const noexcept { return ids_; }
  std::size_t subgroup_count() const noexcept { return ids_.size(); }
  std::size_t instance_count() const noexcept { return membership_.size(); }
  std::size_t subgroup_of(std::size_t instance) const { return membership_.at(instance); }
  const std::vector<std::size_t>& membership() const noexcept { return membership_; }
  const std::vector<std::string>& instance_ids() const noexcept { return instance_ids_; }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  const PartitionSource& source() const noexcept { return source_; }

  std::optional<std::size_t> index_of(std::string_view subgroup) const {
    auto it = std::find(ids_.begin(), ids_.end(), subgroup);
    if (it == ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  std::size_t require_index(std::string_view subgroup) const {
    auto idx = index_of(subgroup);
    if (!idx) throw InvalidArgument("unknown subgroup '" + std::string(subgroup) + "'");
    return *idx;
  }

  std::vector<std::size_t> members(std::size_t subgroup) const {
    std::vector<std::size_t> out;
    out.reserve(sizes_.at(subgroup));
    for (std::size_t i = 0; i < membership_.size(); ++i)
      if (membership_[i] == subgroup) out.push_back(i);
    return out;
  }

  std::map<std::string, std::string> assignment() const {
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < membership_.size(); ++i)
      out.emplace(instance_ids_[i], ids_[membership_[i]]);
    return out;
  }

  /// Throws unless this partition covers exactly the dataset's instances, in
  /// dataset order.
  void check_covers(const Dataset& dataset) const {
    if (dataset.size() != instance_ids_.size())
      throw PartitionError("partition covers " + std::to_string(instance_ids_.size()) +
                           " instances but dataset has " + std::to_string(dataset.size()));
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (dataset.instances[i].id != instance_ids_[i])
        throw PartitionError("partition does not match dataset at instance '" +
                             dataset.instances[i].id + "'");
  }

  bool operator==(const SubgroupPartition&) const = default;

private:
  std::vector<std::string> ids_;
  std::vector<std::size_t> membership_;
  std::vector<std::string> instance_ids_;
  PartitionSource source_;
  std::vector<std::size_t> sizes_;
};

/// Rebuilds a partition from an id -> subgroup map (e.g. a partition file).
/// Subgroup order is first appearance in dataset order.
inline SubgroupPartition partition_from_assignment(
    const Dataset& dataset, const std::map<std::string, std::string>& assignment,
    PartitionSource source) {
  std::vector<std::string> ids;
  std::vector<std::size_t> membership;
  std::vector<std::string> instance_ids;
  membership.reserve(dataset.size());
  for (const auto& inst : dataset.instances) {
    auto it = assignment.find(inst.id);
    if (it == assignment.end())
      throw PartitionError("instance '" + inst.id + "' has no subgroup");
    auto pos = std::find(ids.begin(), ids.end(), it->second);
    if (pos == ids.end()) {
      ids.push_back(it->second);
      pos = ids.end() - 1;
    }
    membership.push_back(static_cast<std::size_t>(pos - ids.begin()));
    instance_ids.push_back(inst.id);
  }
  if (assignment.size() != dataset.size())
    throw PartitionError("assignment names instances that are not in the dataset");
  return SubgroupPartition(std::move(ids), std::move(membership), std::move(instance_ids),
                           std::move(source));
}

}  // namespace sto
