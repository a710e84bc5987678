#pragma once

#include <concepts>
#include <cstddef>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <string_view>

#include "sto/dataset.hpp"
#include "sto/errors.hpp"
#include "sto/subgroups.hpp"

namespace sto {

/// Positive iff score >= tau. The boundary is inclusive; the optimizer's
/// reported optima depend on it.
constexpr bool classify(double score, double tau) noexcept { return score >= tau; }

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double tau = 0.0;

  constexpr std::size_t total() const noexcept { return tp + fp + tn + fn; }
  constexpr std::size_t predicted_positive() const noexcept { return tp + fp; }

  constexpr ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

enum class UtilityKind { ppv, npv, tpr, accuracy };

inline std::string_view to_string(UtilityKind kind) noexcept {
  switch (kind) {
    case UtilityKind::ppv: return "PPV";
    case UtilityKind::npv: return "NPV";
    case UtilityKind::tpr: return "TPR";
    case UtilityKind::accuracy: return "ACCURACY";
  }
  return "?";
}

inline std::optional<UtilityKind> parse_utility_kind(std::string_view s) noexcept {
  if (s == "PPV") return UtilityKind::ppv;
  if (s == "NPV") return UtilityKind::npv;
  if (s == "TPR") return UtilityKind::tpr;
  if (s == "ACCURACY") return UtilityKind::accuracy;
  return std::nullopt;
}

/// Raised when the chosen measure's denominator is zero, e.g. PPV with no
/// positive predictions. Carries the counts so callers can report them.
class UndefinedUtility : public Error {
public:
  UndefinedUtility(UtilityKind kind, const ConfusionCounts& counts, std::string context = {})
      : Error(message(kind, counts, context)), kind_(kind), counts_(counts) {}

  UtilityKind kind() const noexcept { return kind_; }
  const ConfusionCounts& counts() const noexcept { return counts_; }

private:
  static std::string message(UtilityKind kind, const ConfusionCounts& c,
                             const std::string& context) {
    std::string m = std::string(to_string(kind)) + " undefined";
    if (!context.empty()) m += " for " + context;
    m += " at tau=" + std::to_string(c.tau) + " (tp=" + std::to_string(c.tp) +
         " fp=" + std::to_string(c.fp) + " tn=" + std::to_string(c.tn) +
         " fn=" + std::to_string(c.fn) + ")";
    return m;
  }

  UtilityKind kind_;
  ConfusionCounts counts_;
};

template <typename T>
concept ScoredRecord = requires(const T& r) {
  { r.score } -> std::convertible_to<double>;
  { r.label } -> std::convertible_to<int>;
};

/// Tallies outcomes for every record in `records` at threshold `tau`.
template <std::ranges::input_range R>
  requires ScoredRecord<std::ranges::range_value_t<R>>
ConfusionCounts confusion_counts(const R& records, double tau) {
  ConfusionCounts c{.tau = tau};
  for (const auto& r : records) {
    const bool positive = classify(r.score, tau);
    if (r.label == 1)
      positive ? ++c.tp : ++c.fn;
    else
      positive ? ++c.fp : ++c.tn;
  }
  if (c.total() == 0) throw EmptyInput("confusion_counts: empty instance collection");
  return c;
}

/// Counts over a subset of a dataset given by instance positions.
inline ConfusionCounts confusion_counts(const Dataset& dataset,
                                        std::span<const std::size_t> indices, double tau) {
  auto view = indices | std::views::transform(
                            [&](std::size_t i) -> const ScoredInstance& {
                              return dataset.instances.at(i);
                            });
  return confusion_counts(view, tau);
}

inline std::optional<double> try_utility(const ConfusionCounts& c, UtilityKind kind) noexcept {
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  switch (kind) {
    case UtilityKind::ppv: return ratio(c.tp, c.tp + c.fp);
    case UtilityKind::npv: return ratio(c.tn, c.tn + c.fn);
    case UtilityKind::tpr: return ratio(c.tp, c.tp + c.fn);
    case UtilityKind::accuracy: return ratio(c.tp + c.tn, c.total());
  }
  return std::nullopt;
}

inline double utility(const ConfusionCounts& c, UtilityKind kind) {
  if (auto v = try_utility(c, kind)) return *v;
  throw UndefinedUtility(kind, c);
}

inline double subgroup_utility(const Dataset& dataset, const SubgroupPartition& partition,
                               std::string_view subgroup, double tau, UtilityKind kind) {
  partition.check_covers(dataset);
  const auto idx = partition.require_index(subgroup);
  const auto members = partition.members(idx);
  const auto counts = confusion_counts(dataset, members, tau);
  if (auto v = try_utility(counts, kind)) return *v;
  throw UndefinedUtility(kind, counts, "subgroup '" + std::string(subgroup) + "'");
}

}  // namespace sto
