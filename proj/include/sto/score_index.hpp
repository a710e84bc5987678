#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sto/dataset.hpp"
#include "sto/metrics.hpp"
#include "sto/subgroups.hpp"

namespace sto {

/// Score-sorted view of one instance set. Answers confusion counts at any
/// threshold in O(log n) via suffix sums of labels.
class ScoreCurve {
public:
  ScoreCurve() = default;

  template <std::ranges::input_range R>
    requires ScoredRecord<std::ranges::range_value_t<R>>
  explicit ScoreCurve(const R& records) {
    std::vector<std::pair<double, int>> rows;
    for (const auto& r : records) rows.emplace_back(r.score, r.label);
    build(std::move(rows));
  }

  std::size_t size() const noexcept { return scores_.size(); }

  ConfusionCounts counts_at(double tau) const {
    const auto first = std::lower_bound(scores_.begin(), scores_.end(), tau);
    const auto idx = static_cast<std::size_t>(first - scores_.begin());
    ConfusionCounts c{.tau = tau};
    c.tp = positives_from_[idx];
    c.fp = (scores_.size() - idx) - c.tp;
    c.fn = total_positive() - c.tp;
    c.tn = idx - c.fn;
    return c;
  }

  std::size_t total_positive() const noexcept { return positives_from_.front(); }

  std::span<const double> sorted_scores() const noexcept { return scores_; }

private:
  void build(std::vector<std::pair<double, int>> rows) {
    std::sort(rows.begin(), rows.end());
    scores_.resize(rows.size());
    positives_from_.assign(rows.size() + 1, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) scores_[i] = rows[i].first;
    for (std::size_t i = rows.size(); i-- > 0;)
      positives_from_[i] = positives_from_[i + 1] + (rows[i].second == 1 ? 1 : 0);
  }

  std::vector<double> scores_;
  // positives_from_[i] = number of label-1 rows among sorted rows [i, n).
  std::vector<std::size_t> positives_from_{0};
};

/// One ScoreCurve per subgroup of a partition.
class PartitionIndex {
public:
  PartitionIndex(const Dataset& dataset, const SubgroupPartition& partition) {
    partition.check_covers(dataset);
    std::vector<std::vector<const ScoredInstance*>> buckets(partition.subgroup_count());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      buckets[partition.subgroup_of(i)].push_back(&dataset.instances[i]);
    curves_.reserve(buckets.size());
    for (const auto& b : buckets)
      curves_.emplace_back(b | std::views::transform(
                                   [](const ScoredInstance* p) -> const ScoredInstance& {
                                     return *p;
                                   }));
  }

  std::size_t subgroup_count() const noexcept { return curves_.size(); }
  const ScoreCurve& curve(std::size_t subgroup) const { return curves_.at(subgroup); }

  ConfusionCounts counts_at(std::size_t subgroup, double tau) const {
    return curves_.at(subgroup).counts_at(tau);
  }

  /// Pooled counts with subgroup g classified at thresholds[g].
  ConfusionCounts pooled_counts(std::span<const double> thresholds) const {
    ConfusionCounts total{};
    for (std::size_t g = 0; g < curves_.size(); ++g) total += curves_[g].counts_at(thresholds[g]);
    total.tau = thresholds.empty() ? 0.0 : thresholds.front();
    return total;
  }

private:
  std::vector<ScoreCurve> curves_;
};

}  // namespace sto
