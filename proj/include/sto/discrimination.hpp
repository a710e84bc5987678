#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sto/errors.hpp"

namespace sto {

/// Utility gap between a reference subgroup and a compared subgroup.
/// Positive values mean the compared subgroup fares worse.
struct DiscriminationScore {
  std::string reference_subgroup;
  std::string compared_subgroup;
  double value = 0.0;
  double tau_reference = 0.0;
  double tau_compared = 0.0;
};

inline double discrimination_score(double u_compared, double u_reference) noexcept {
  return u_reference - u_compared;
}

/// Variant that accepts possibly-undefined utilities and refuses to guess.
inline double discrimination_score(const std::optional<double>& u_compared,
                                   const std::optional<double>& u_reference) {
  if (!u_compared || !u_reference)
    throw InvalidArgument("discrimination score needs both utilities to be defined");
  return *u_reference - *u_compared;
}

/// Utility of one subgroup at a shared threshold, with the number of
/// positive predictions used to break ties between equal utilities.
struct SubgroupUtility {
  std::string subgroup;
  std::optional<double> value;
  std::size_t predicted_positive = 0;
};

struct DominanceResult {
  std::string dominating_subgroup;
  std::map<std::string, double> utilities;
  bool tie_broken = false;
};

/// Argmax of utility. Ties: larger positive-prediction count wins, then the
/// lexicographically smallest id; `tie_broken` records that a tie occurred.
inline DominanceResult find_dominating(const std::vector<SubgroupUtility>& utilities) {
  if (utilities.size() < 2) throw InvalidArgument("dominance needs at least 2 subgroups");
  DominanceResult out;
  for (const auto& u : utilities) {
    if (!u.value)
      throw InvalidArgument("utility undefined for subgroup '" + u.subgroup +
                            "'; adjust the baseline threshold or the subgrouping");
    out.utilities[u.subgroup] = *u.value;
  }
  const SubgroupUtility* best = &utilities.front();
  for (const auto& u : utilities) {
    if (&u == best) continue;
    if (*u.value > *best->value ||
        (*u.value == *best->value &&
         (u.predicted_positive > best->predicted_positive ||
          (u.predicted_positive == best->predicted_positive && u.subgroup < best->subgroup))))
      best = &u;
  }
  for (const auto& u : utilities)
    if (&u != best && *u.value == *best->value) out.tie_broken = true;
  out.dominating_subgroup = best->subgroup;
  return out;
}

/// Convenience overload for plain utility maps (equal support assumed).
inline DominanceResult find_dominating(const std::map<std::string, double>& utilities) {
  std::vector<SubgroupUtility> v;
  for (const auto& [id, u] : utilities) v.push_back({id, u, 0});
  return find_dominating(v);
}

}  // namespace sto
