#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sto/errors.hpp"

namespace sto {

/// One observation: the classifier's probability estimate for the positive
/// class, the observed binary outcome, and optional features / group value.
/// Missing feature cells are stored as NaN.
struct ScoredInstance {
  std::string id;
  double score = 0.0;
  int label = 0;
  std::vector<double> features;
  std::optional<std::string> attribute;

  bool operator==(const ScoredInstance&) const = default;
};

struct Dataset {
  std::vector<ScoredInstance> instances;
  std::vector<std::string> feature_names;
  // Name of the categorical group column; empty when the dataset has none.
  std::string attribute_name;

  std::size_t size() const noexcept { return instances.size(); }
  bool empty() const noexcept { return instances.empty(); }

  bool operator==(const Dataset&) const = default;
};

inline bool valid_probability(double x) noexcept {
  return std::isfinite(x) && x >= 0.0 && x <= 1.0;
}

/// Checks the per-instance invariants (score range, binary label, unique
/// ids, feature width). Throws InvalidArgument naming the first offender.
inline void validate(const Dataset& dataset) {
  std::unordered_map<std::string, std::size_t> seen;
  seen.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    if (!valid_probability(inst.score))
      throw InvalidArgument("instance '" + inst.id + "': score outside [0,1]");
    if (inst.label != 0 && inst.label != 1)
      throw InvalidArgument("instance '" + inst.id + "': label must be 0 or 1");
    if (!inst.features.empty() &&
        inst.features.size() != dataset.feature_names.size())
      throw InvalidArgument("instance '" + inst.id +
                            "': feature vector length does not match feature_names");
    if (auto [it, fresh] = seen.emplace(inst.id, i); !fresh)
      throw InvalidArgument("duplicate instance id '" + inst.id + "'");
  }
}

}  // namespace sto
