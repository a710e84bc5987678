#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sto/dataset.hpp"
#include "sto/errors.hpp"
#include "sto/subgroups.hpp"

namespace sto {

/// Dense row-major matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const FeatureMatrix&) const = default;
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
  bool operator==(const Standardization&) const = default;
};

struct StandardizedFeatures {
  FeatureMatrix matrix;
  Standardization params;
};

/// Extracts the dataset's feature vectors. Every instance must carry a
/// complete, finite feature vector.
inline FeatureMatrix feature_matrix(const Dataset& dataset) {
  if (dataset.empty()) throw EmptyInput("no instances to cluster");
  const std::size_t d = dataset.feature_names.size();
  if (d == 0) throw ClusteringError("dataset has no feature columns");
  std::vector<std::string> bad;
  FeatureMatrix m(dataset.size(), d);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& f = dataset.instances[i].features;
    bool ok = f.size() == d && std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
    if (!ok) {
      bad.push_back(dataset.instances[i].id);
      continue;
    }
    std::copy(f.begin(), f.end(), m.row(i).begin());
  }
  if (!bad.empty()) {
    std::string msg = "missing or non-finite features for instance(s):";
    for (std::size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + bad[i];
    if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " total)";
    throw ClusteringError(msg);
  }
  return m;
}

inline void apply_standardization(FeatureMatrix& m, const Standardization& p) {
  if (p.mean.size() != m.cols || p.scale.size() != m.cols)
    throw ClusteringError("standardization dimension mismatch");
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = (m.at(i, j) - p.mean[j]) / p.scale[j];
}

/// Centers each column and divides by its sample standard deviation (n - 1
/// denominator). Constant columns (or a single row) get scale 1.
inline StandardizedFeatures standardize(FeatureMatrix m) {
  if (m.rows == 0) throw EmptyInput("standardize: zero instances");
  Standardization p{std::vector<double>(m.cols, 0.0), std::vector<double>(m.cols, 1.0)};
  for (std::size_t j = 0; j < m.cols; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) sum += m.at(i, j);
    const double mean = sum / static_cast<double>(m.rows);
    double ss = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) ss += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    double sd = m.rows > 1 ? std::sqrt(ss / static_cast<double>(m.rows - 1)) : 0.0;
    // Relative cutoff so a column of identical values with rounding noise
    // still counts as constant.
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;
    p.mean[j] = mean;
    p.scale[j] = sd;
  }
  apply_standardization(m, p);
  return {std::move(m), std::move(p)};
}

inline StandardizedFeatures standardize(const Dataset& dataset) {
  return standardize(feature_matrix(dataset));
}

struct KMeansOptions {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double tol = 1e-6;
  // Independent k-means++ restarts; the lowest-inertia run wins.
  std::size_t n_init = 10;
};

struct ClusterModel {
  FeatureMatrix centroids;  // k x d, standardized space
  Standardization standardization;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after each assignment step of the winning run.
  std::vector<double> inertia_history;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// [0, 1) with 53 random bits; independent of the standard library's
// distribution implementations so results are reproducible across toolchains.
inline double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Nearest centroid; ties go to the lowest index.
inline std::size_t nearest(const FeatureMatrix& centroids, std::span<const double> x,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_distance(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline FeatureMatrix seed_plus_plus(const FeatureMatrix& x, std::size_t k, std::mt19937_64& rng) {
  FeatureMatrix centroids(k, x.cols);
  std::size_t first = std::min(x.rows - 1, static_cast<std::size_t>(unit_draw(rng) * x.rows));
  std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());
  std::vector<double> d2(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = unit_draw(rng) * total;
      pick = x.rows - 1;
      for (std::size_t i = 0; i < x.rows; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::min(x.rows - 1, static_cast<std::size_t>(unit_draw(rng) * x.rows));
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < x.rows; ++i)
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c)));
  }
  return centroids;
}

struct LloydRun {
  FeatureMatrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> history;
};

inline LloydRun lloyd(const FeatureMatrix& x, FeatureMatrix centroids, std::size_t max_iter,
                      double tol) {
  const std::size_t k = centroids.rows;
  std::vector<std::size_t> label(x.rows);
  std::vector<double> dist(x.rows);
  LloydRun run;

  auto assign = [&] {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      label[i] = nearest(centroids, x.row(i), &dist[i]);
      inertia += dist[i];
    }
    return inertia;
  };

  for (std::size_t it = 0; it < max_iter; ++it) {
    run.history.push_back(assign());
    run.iterations = it + 1;

    FeatureMatrix next(k, x.cols);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
      auto dst = next.row(label[i]);
      auto src = x.row(i);
      for (std::size_t j = 0; j < x.cols; ++j) dst[j] += src[j];
      ++count[label[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Empty cluster: move it onto the point currently farthest from its centroid.
        std::size_t far = static_cast<std::size_t>(
            std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy(x.row(far).begin(), x.row(far).end(), next.row(c).begin());
        dist[far] = 0.0;
        continue;
      }
      for (double& v : next.row(c)) v /= static_cast<double>(count[c]);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
    centroids = std::move(next);
    if (shift < tol) break;
  }
  run.inertia = assign();
  run.history.push_back(run.inertia);
  run.centroids = std::move(centroids);
  return run;
}

}  // namespace detail

/// Lloyd's k-means from k-means++ seeding on an already standardized matrix.
/// Deterministic for a given seed. The returned model carries an identity
/// standardization; fit_clusters() fills in the real one.
inline ClusterModel kmeans_fit(const FeatureMatrix& x, const KMeansOptions& opt) {
  if (opt.k < 2) throw ClusteringError("k must be at least 2");
  if (x.rows < opt.k)
    throw ClusteringError("k=" + std::to_string(opt.k) + " exceeds row count " +
                          std::to_string(x.rows));
  if (x.cols == 0) throw ClusteringError("feature matrix has no columns");
  if (!std::all_of(x.data.begin(), x.data.end(), [](double v) { return std::isfinite(v); }))
    throw ClusteringError("non-finite feature value");
  if (opt.max_iter == 0) throw ClusteringError("max_iter must be positive");

  std::mt19937_64 rng(detail::splitmix64(opt.seed));
  detail::LloydRun best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opt.n_init); ++r) {
    auto run = detail::lloyd(x, detail::seed_plus_plus(x, opt.k, rng), opt.max_iter, opt.tol);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  ClusterModel model;
  model.k = opt.k;
  model.seed = opt.seed;
  model.inertia = best.inertia;
  model.iterations = best.iterations;
  model.inertia_history = std::move(best.history);
  model.centroids = std::move(best.centroids);
  model.standardization = {std::vector<double>(x.cols, 0.0), std::vector<double>(x.cols, 1.0)};
  return model;
}

struct ElbowResult {
  std::map<std::size_t, double> inertia_by_k;
  std::size_t chosen_k = 0;
  std::string method = "max_distance_to_chord";
};

/// Picks the point of the (k, inertia) curve farthest from the chord joining
/// its endpoints, both axes rescaled to [0, 1]. Ties go to the smallest k.
inline std::size_t select_elbow(const std::map<std::size_t, double>& curve) {
  if (curve.size() < 3) throw ClusteringError("elbow needs at least 3 points; pass an explicit k");
  const auto [k0, i0] = *curve.begin();
  const auto [k1, i1] = *curve.rbegin();
  double hi = i0, lo = i0;
  for (const auto& [k, v] : curve) {
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  const double kspan = static_cast<double>(k1 - k0);
  const double ispan = hi - lo;
  auto nx = [&](std::size_t k) { return static_cast<double>(k - k0) / kspan; };
  auto ny = [&](double v) { return ispan > 0.0 ? (v - lo) / ispan : 0.0; };
  const double ax = 0.0, ay = ny(i0), bx = 1.0, by = ny(i1);
  const double len = std::hypot(bx - ax, by - ay);

  std::size_t chosen = k0;
  double best = -1.0;
  for (const auto& [k, v] : curve) {
    const double px = nx(k), py = ny(v);
    const double d = std::abs((bx - ax) * (ay - py) - (ax - px) * (by - ay)) / len;
    if (d > best + 1e-12) {
      best = d;
      chosen = k;
    }
  }
  return chosen;
}

/// Fits k-means for every k in [k_min, k_max] (seed + k per fit) and selects
/// k by select_elbow(). The whole curve is returned for review.
inline ElbowResult elbow_select_k(const FeatureMatrix& x, std::size_t k_min, std::size_t k_max,
                                  std::uint64_t seed, KMeansOptions base = {}) {
  if (k_min > k_max) throw ClusteringError("empty k range");
  if (k_max - k_min + 1 < 3)
    throw ClusteringError("k range must span at least 3 values for the elbow; pass an explicit k");
  if (k_min < 2 || k_max > x.rows)
    throw ClusteringError("k range must lie within [2, " + std::to_string(x.rows) + "]");
  ElbowResult result;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    KMeansOptions opt = base;
    opt.k = k;
    opt.seed = seed + k;
    result.inertia_by_k[k] = kmeans_fit(x, opt).inertia;
  }
  result.chosen_k = select_elbow(result.inertia_by_k);
  return result;
}

/// Standardizes the dataset's features and fits k-means; the model keeps the
/// standardization so new data can be assigned in the same space.
inline ClusterModel fit_clusters(const Dataset& dataset, const KMeansOptions& opt) {
  auto z = standardize(dataset);
  auto model = kmeans_fit(z.matrix, opt);
  model.standardization = std::move(z.params);
  return model;
}

struct ClusterPartition {
  SubgroupPartition partition;
  std::vector<std::string> warnings;
};

inline std::string cluster_name(std::size_t c) { return "C" + std::to_string(c); }

/// Nearest-centroid assignment in the model's standardized space. Clusters
/// that receive no instances are dropped with a warning; subgroups are named
/// C<index> after the centroid they came from.
inline ClusterPartition assign_clusters(const ClusterModel& model, const Dataset& dataset) {
  auto m = feature_matrix(dataset);
  if (m.cols != model.centroids.cols)
    throw ClusteringError("dataset has " + std::to_string(m.cols) +
                          " features but model expects " + std::to_string(model.centroids.cols));
  apply_standardization(m, model.standardization);

  std::vector<std::size_t> raw(m.rows);
  std::vector<std::size_t> count(model.centroids.rows, 0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    raw[i] = detail::nearest(model.centroids, m.row(i));
    ++count[raw[i]];
  }
  std::vector<std::string> warnings;
  std::vector<std::size_t> remap(count.size(), 0);
  std::vector<std::string> ids;
  for (std::size_t c = 0; c < count.size(); ++c) {
    if (count[c] == 0) {
      warnings.push_back("cluster " + cluster_name(c) + " is empty and was dropped");
      continue;
    }
    remap[c] = ids.size();
    ids.push_back(cluster_name(c));
  }
  std::vector<std::size_t> membership(m.rows);
  std::vector<std::string> instance_ids(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    membership[i] = remap[raw[i]];
    instance_ids[i] = dataset.instances[i].id;
  }
  return {SubgroupPartition(std::move(ids), std::move(membership), std::move(instance_ids),
                            ClusterSource{model.k, model.seed, model.inertia}),
          std::move(warnings)};
}

}  // namespace sto
