#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "sto/dataset.hpp"
#include "sto/discrimination.hpp"
#include "sto/errors.hpp"
#include "sto/metrics.hpp"
#include "sto/optimizer_types.hpp"
#include "sto/score_index.hpp"
#include "sto/subgroups.hpp"

namespace sto {

// ---------------------------------------------------------------------------
// Step 1: baselines
// ---------------------------------------------------------------------------

struct Baseline {
  std::vector<std::string> subgroups;
  std::map<std::string, double> utility;
  std::map<std::string, ConfusionCounts> counts;
  double overall = 0.0;
  ConfusionCounts overall_counts;
  DominanceResult dominance;
};

inline Baseline baseline_report(const Dataset& dataset, const SubgroupPartition& partition,
                                const OptimizerConfig& config) {
  config.validate();
  partition.check_covers(dataset);
  Baseline b;
  b.subgroups = partition.subgroup_ids();
  std::vector<SubgroupUtility> su;
  for (std::size_t g = 0; g < partition.subgroup_count(); ++g) {
    const auto& id = partition.subgroup_ids()[g];
    const auto members = partition.members(g);
    const auto c = confusion_counts(dataset, members, config.tau_base);
    const auto u = try_utility(c, config.utility);
    if (!u) throw UndefinedUtility(config.utility, c, "subgroup '" + id + "'");
    b.counts[id] = c;
    b.utility[id] = *u;
    su.push_back({id, u, c.predicted_positive()});
  }
  b.overall_counts = confusion_counts(dataset.instances, config.tau_base);
  b.overall = utility(b.overall_counts, config.utility);
  b.dominance = find_dominating(su);
  return b;
}

// ---------------------------------------------------------------------------
// Candidate grids
// ---------------------------------------------------------------------------

/// Rounds to 12 decimals so grid points such as 13 * 0.05 land on the same
/// double as the literal 0.65.
inline double snap_threshold(double x) noexcept { return std::round(x * 1e12) / 1e12; }

inline std::vector<double> candidate_thresholds(const OptimizerConfig& config,
                                                const Dataset& dataset) {
  config.validate();
  std::vector<double> out;
  switch (config.grid.kind) {
    case GridSpec::Kind::uniform: {
      const double step = config.grid.step;
      const auto n = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) out.push_back(std::min(1.0, snap_threshold(i * step)));
      if (out.back() < 1.0) out.push_back(1.0);
      break;
    }
    case GridSpec::Kind::observed_scores:
      out.reserve(dataset.size() + 2);
      out.push_back(0.0);
      for (const auto& inst : dataset.instances) out.push_back(inst.score);
      out.push_back(1.0);
      std::sort(out.begin(), out.end());
      break;
    case GridSpec::Kind::explicit_list:
      out = config.grid.values;
      break;
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Step 2: search
// ---------------------------------------------------------------------------

/// Distance from the baseline threshold in units of 1e-12, so that 0.45 and
/// 0.55 are equally far from 0.50 despite binary rounding.
inline std::int64_t threshold_distance(double tau, double tau_base) noexcept {
  return std::llround(std::abs(tau - tau_base) * 1e12);
}

struct SubgroupOptimum {
  double tau = 0.0;
  double utility = 0.0;
  double gap = 0.0;
};

namespace detail {

struct Option {
  double tau;
  ConfusionCounts counts;
  double utility;
  double gap;
  std::int64_t dist;
};

inline bool option_less(const Option& a, const Option& b) noexcept {
  return std::tie(a.gap, a.dist, a.tau) < std::tie(b.gap, b.dist, b.tau);
}

// Feasible options for one subgroup (utility defined and within
// [floor, ceiling]), best first. tau_base is always part of the search set.
inline std::vector<Option> feasible_options(const ScoreCurve& curve,
                                            const std::vector<double>& candidates,
                                            double tau_base, double floor, double ceiling,
                                            UtilityKind kind) {
  std::vector<Option> out;
  auto consider = [&](double tau) {
    const auto c = curve.counts_at(tau);
    const auto u = try_utility(c, kind);
    if (!u || *u < floor || *u > ceiling) return;
    out.push_back({tau, c, *u, ceiling - *u, threshold_distance(tau, tau_base)});
  };
  bool base_seen = false;
  for (double tau : candidates) {
    base_seen = base_seen || tau == tau_base;
    consider(tau);
  }
  if (!base_seen) consider(tau_base);
  std::sort(out.begin(), out.end(), option_less);
  return out;
}

// Lexicographic key over a full assignment of the compared subgroups.
struct JointKey {
  double primary;
  double secondary;
  std::int64_t dist;
  std::vector<double> taus;

  bool operator<(const JointKey& o) const {
    return std::tie(primary, secondary, dist, taus) <
           std::tie(o.primary, o.secondary, o.dist, o.taus);
  }
};

struct JointSolution {
  std::vector<std::size_t> choice;  // index into each subgroup's option list
  JointKey key;
};

// Chooses one option per compared subgroup minimizing the aggregate objective
// subject to the pooled utility not dropping below `pooled_floor`. `fixed`
// holds the counts contributed by subgroups that are not being searched.
class JointSearch {
public:
  JointSearch(const std::vector<std::vector<Option>>& options, ConfusionCounts fixed,
              double pooled_floor, UtilityKind kind, AggregateObjective objective)
      : options_(options), fixed_(fixed), floor_(pooled_floor), kind_(kind),
        objective_(objective) {}

  std::optional<JointSolution> solve() {
    const std::size_t m = options_.size();
    for (const auto& o : options_)
      if (o.empty()) return std::nullopt;

    std::vector<std::size_t> greedy(m, 0);
    if (auto key = evaluate(greedy)) return JointSolution{greedy, std::move(*key)};

    // The per-subgroup optima violate the pooled constraint: branch and bound.
    min_gap_.resize(m);
    for (std::size_t g = 0; g < m; ++g) min_gap_[g] = options_[g].front().gap;
    current_.assign(m, 0);
    best_.reset();
    descend(0, 0.0, 0.0);
    return best_;
  }

private:
  std::pair<double, double> order(double max_gap, double sum_gap) const {
    return objective_ == AggregateObjective::max_gap ? std::pair{max_gap, sum_gap}
                                                     : std::pair{sum_gap, max_gap};
  }

  std::optional<JointKey> evaluate(const std::vector<std::size_t>& choice) const {
    ConfusionCounts pooled = fixed_;
    double max_gap = 0.0, sum_gap = 0.0;
    std::int64_t dist = 0;
    std::vector<double> taus;
    taus.reserve(choice.size());
    for (std::size_t g = 0; g < choice.size(); ++g) {
      const auto& o = options_[g][choice[g]];
      pooled += o.counts;
      max_gap = std::max(max_gap, o.gap);
      sum_gap += o.gap;
      dist += o.dist;
      taus.push_back(o.tau);
    }
    const auto u = try_utility(pooled, kind_);
    if (!u || *u < floor_) return std::nullopt;
    auto [p, s] = order(max_gap, sum_gap);
    return JointKey{p, s, dist, std::move(taus)};
  }

  void descend(std::size_t g, double max_gap, double sum_gap) {
    if (g == options_.size()) {
      if (auto key = evaluate(current_); key && (!best_ || *key < best_->key))
        best_ = JointSolution{current_, std::move(*key)};
      return;
    }
    double rest_max = 0.0, rest_sum = 0.0;
    for (std::size_t h = g + 1; h < options_.size(); ++h) {
      rest_max = std::max(rest_max, min_gap_[h]);
      rest_sum += min_gap_[h];
    }
    for (std::size_t i = 0; i < options_[g].size(); ++i) {
      const auto& o = options_[g][i];
      const double lb_max = std::max({max_gap, o.gap, rest_max});
      const double lb_sum = sum_gap + o.gap + rest_sum;
      if (best_) {
        auto [p, s] = order(lb_max, lb_sum);
        // Options are sorted by gap, so once the bound is strictly worse it
        // stays worse for the rest of this list.
        if (p > best_->key.primary ||
            (p == best_->key.primary && s > best_->key.secondary + 1e-12))
          break;
      }
      current_[g] = i;
      descend(g + 1, std::max(max_gap, o.gap), sum_gap + o.gap);
    }
  }

  const std::vector<std::vector<Option>>& options_;
  ConfusionCounts fixed_;
  double floor_;
  UtilityKind kind_;
  AggregateObjective objective_;
  std::vector<double> min_gap_;
  std::vector<std::size_t> current_;
  std::optional<JointSolution> best_;
};

}  // namespace detail

/// Best threshold for one subgroup against a fixed reference utility.
///
/// Among candidates (plus tau_base) whose utility is defined and lies in
/// [floor, ceiling], minimizes ceiling - utility; ties go to the threshold
/// nearest tau_base, then the smallest threshold. Since tau_base itself is
/// always feasible when floor is the baseline utility, the result never
/// widens the gap.
inline SubgroupOptimum optimize_subgroup(const ScoreCurve& curve, double ceiling, double floor,
                                         const std::vector<double>& candidates, double tau_base,
                                         UtilityKind kind) {
  if (floor > ceiling) throw InvalidArgument("optimize_subgroup: floor exceeds ceiling");
  if (candidates.empty()) throw InvalidArgument("optimize_subgroup: no candidate thresholds");
  const auto options = detail::feasible_options(curve, candidates, tau_base, floor, ceiling, kind);
  if (options.empty()) {
    const auto u = try_utility(curve.counts_at(tau_base), kind);
    return {tau_base, u.value_or(std::numeric_limits<double>::quiet_NaN()),
            u ? ceiling - *u : std::numeric_limits<double>::quiet_NaN()};
  }
  return {options.front().tau, options.front().utility, options.front().gap};
}

template <std::ranges::input_range R>
  requires ScoredRecord<std::ranges::range_value_t<R>>
SubgroupOptimum optimize_subgroup(const R& instances, double ceiling, double floor,
                                  const std::vector<double>& candidates, double tau_base,
                                  UtilityKind kind) {
  return optimize_subgroup(ScoreCurve(instances), ceiling, floor, candidates, tau_base, kind);
}

/// Classifies each instance with its subgroup's threshold, in dataset order.
inline std::vector<bool> apply_thresholds(const Dataset& dataset,
                                          const SubgroupPartition& partition,
                                          const ThresholdAssignment& assignment) {
  partition.check_covers(dataset);
  std::vector<double> tau(partition.subgroup_count());
  for (std::size_t g = 0; g < tau.size(); ++g) tau[g] = assignment.at(partition.subgroup_ids()[g]);
  std::vector<bool> out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    out[i] = classify(dataset.instances[i].score, tau[partition.subgroup_of(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Step 3: validation
// ---------------------------------------------------------------------------

/// Re-derives every constrained quantity from the raw data (not from the
/// report's numbers) and checks:
///   subgroup_bounds          baseline_i <= adjusted_i <= reference
///   pooled_non_decreasing    pooled utility at the assignment >= at tau_base
///   dominant_non_decreasing  adjusted dominant >= baseline dominant
/// The reference is the dominant's baseline utility in fixed_dominant mode
/// and its adjusted utility in free_dominant mode.
inline ValidationVerdict validate(const OptimizationReport& report, const Dataset& dataset,
                                  const SubgroupPartition& partition,
                                  const OptimizerConfig& config) {
  partition.check_covers(dataset);
  ValidationVerdict v;
  const auto kind = config.utility;
  auto describe = [](const std::optional<double>& u) {
    return u ? std::to_string(*u) : std::string("undefined");
  };

  std::map<std::string, std::optional<double>> base, adj;
  ConfusionCounts pooled_base{}, pooled_adj{};
  for (std::size_t g = 0; g < partition.subgroup_count(); ++g) {
    const auto& id = partition.subgroup_ids()[g];
    const auto members = partition.members(g);
    const auto cb = confusion_counts(dataset, members, config.tau_base);
    double tau = config.tau_base;
    if (auto it = report.assignment.per_subgroup.find(id); it != report.assignment.per_subgroup.end())
      tau = it->second;
    const auto ca = confusion_counts(dataset, members, tau);
    base[id] = try_utility(cb, kind);
    adj[id] = try_utility(ca, kind);
    pooled_base += cb;
    pooled_adj += ca;
  }

  const auto& k = report.dominating;
  const auto k_base = base.count(k) ? base[k] : std::nullopt;
  const auto k_adj = adj.count(k) ? adj[k] : std::nullopt;
  const auto reference = config.mode == DominantMode::fixed_dominant ? k_base : k_adj;

  for (const auto& id : partition.subgroup_ids()) {
    if (id == k) continue;
    const auto& b = base[id];
    const auto& a = adj[id];
    const bool ok = b && a && reference && *a >= *b && *a <= *reference;
    v.checks.push_back({"subgroup_bounds", id, ok,
                        "baseline " + describe(b) + " <= adjusted " + describe(a) +
                            " <= reference " + describe(reference)});
  }
  {
    const auto pb = try_utility(pooled_base, kind);
    const auto pa = try_utility(pooled_adj, kind);
    v.checks.push_back({"pooled_non_decreasing", "", pb && pa && *pa >= *pb,
                        "pooled adjusted " + describe(pa) + " >= pooled baseline " + describe(pb)});
  }
  v.checks.push_back({"dominant_non_decreasing", k, k_base && k_adj && *k_adj >= *k_base,
                      "adjusted " + describe(k_adj) + " >= baseline " + describe(k_base)});
  return v;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

/// Runs baseline, search, and validation.
///
/// fixed_dominant: the dominating subgroup keeps tau_base and every other
/// subgroup is searched against its baseline utility.
/// free_dominant: every candidate threshold for the dominant whose utility is
/// at least its baseline is tried as the new reference; the others are solved
/// against it and the reference minimizing the aggregate objective wins
/// (ties: the other aggregate, then distance to tau_base, then smallest tau).
/// In both modes the pooled utility may not fall below its baseline.
inline OptimizationReport optimize(const Dataset& dataset, const SubgroupPartition& partition,
                                   const OptimizerConfig& config) {
  const Baseline base = baseline_report(dataset, partition, config);
  const PartitionIndex index(dataset, partition);
  const auto candidates = candidate_thresholds(config, dataset);
  const auto& ids = partition.subgroup_ids();
  const auto kind = config.utility;
  const std::size_t k = partition.require_index(base.dominance.dominating_subgroup);
  const double k_base = base.utility.at(ids[k]);

  std::vector<std::size_t> others;
  for (std::size_t g = 0; g < ids.size(); ++g)
    if (g != k) others.push_back(g);

  struct Outcome {
    double tau_k;
    std::int64_t dist_k;
    std::vector<double> taus;  // per entry of `others`
    detail::JointKey key;
  };

  auto solve_for = [&](double tau_k) -> std::optional<Outcome> {
    const auto ck = index.counts_at(k, tau_k);
    const auto uk = try_utility(ck, kind);
    if (!uk || *uk < k_base) return std::nullopt;
    std::vector<std::vector<detail::Option>> options;
    options.reserve(others.size());
    for (std::size_t g : others)
      options.push_back(detail::feasible_options(index.curve(g), candidates, config.tau_base,
                                                 base.utility.at(ids[g]), *uk, kind));
    detail::JointSearch search(options, ck, base.overall, kind, config.aggregate);
    auto sol = search.solve();
    if (!sol) return std::nullopt;
    Outcome out{tau_k, threshold_distance(tau_k, config.tau_base), {}, sol->key};
    for (std::size_t j = 0; j < others.size(); ++j)
      out.taus.push_back(options[j][sol->choice[j]].tau);
    return out;
  };

  std::optional<Outcome> best;
  if (config.mode == DominantMode::fixed_dominant) {
    best = solve_for(config.tau_base);
  } else {
    std::vector<double> dominant_taus = candidates;
    if (std::find(candidates.begin(), candidates.end(), config.tau_base) == candidates.end())
      dominant_taus.push_back(config.tau_base);
    for (double tau_k : dominant_taus) {
      auto o = solve_for(tau_k);
      if (!o) continue;
      if (!best || std::tie(o->key.primary, o->key.secondary, o->dist_k, o->tau_k) <
                       std::tie(best->key.primary, best->key.secondary, best->dist_k, best->tau_k))
        best = std::move(o);
    }
  }
  if (!best) {
    // Unreachable in practice: the all-baseline assignment is always
    // feasible. Keep the baseline rather than fail.
    best = Outcome{config.tau_base, 0, std::vector<double>(others.size(), config.tau_base), {}};
  }

  OptimizationReport r;
  r.config = config;
  r.subgroups = ids;
  r.baseline_utility = base.utility;
  r.baseline_overall = base.overall;
  r.dominating = ids[k];
  r.tie_broken = base.dominance.tie_broken;
  r.assignment.tau_base = config.tau_base;
  r.assignment.per_subgroup[ids[k]] = best->tau_k;
  for (std::size_t j = 0; j < others.size(); ++j) r.assignment.per_subgroup[ids[others[j]]] = best->taus[j];

  std::vector<double> taus(ids.size());
  for (std::size_t g = 0; g < ids.size(); ++g) {
    taus[g] = r.assignment.per_subgroup.at(ids[g]);
    r.adjusted_utility[ids[g]] = utility(index.counts_at(g, taus[g]), kind);
  }
  r.adjusted_overall = utility(index.pooled_counts(taus), kind);
  for (std::size_t g : others) {
    r.discrimination_before[ids[g]] =
        discrimination_score(base.utility.at(ids[g]), base.utility.at(ids[k]));
    r.discrimination_after[ids[g]] =
        discrimination_score(r.adjusted_utility.at(ids[g]), r.adjusted_utility.at(ids[k]));
  }
  compute_differences(r);
  r.validation = validate(r, dataset, partition, config);
  return r;
}

}  // namespace sto
