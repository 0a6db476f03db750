#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace autothrottle::tower {

struct KMeansResult {
  std::vector<int> labels;         // cluster per input, clusters ordered by ascending centroid
  std::vector<double> centroids;   // ascending
  int iterations = 0;
};

namespace detail {

// One Lloyd run from k-means++ seeding. Clusters that end up empty are refilled
// with the point farthest from its centroid. Labels index `centroids` as found.
inline KMeansResult lloyd_1d(const std::vector<double>& values, int k, std::mt19937_64& rng, int max_iter) {
  const int n = static_cast<int>(values.size());
  KMeansResult out;
  std::vector<double> centroids;
  centroids.push_back(values[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (int p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centroids) best = std::min(best, (values[p] - c) * (values[p] - c));
      d2[p] = best;
      total += best;
    }
    if (total <= 0.0) {
      // Every point coincides with a centroid; any duplicate will do.
      centroids.push_back(values[centroids.size() % n]);
      continue;
    }
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    int pick = n - 1;
    for (int p = 0; p < n; ++p) {
      u -= d2[p];
      if (u < 0.0) {
        pick = p;
        break;
      }
    }
    centroids.push_back(values[pick]);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int p = 0; p < n; ++p) {
      // Ties keep the current label so coincident centroids cannot oscillate.
      int best = labels[p] >= 0 ? labels[p] : 0;
      for (int c = 0; c < k; ++c)
        if (std::abs(values[p] - centroids[c]) < std::abs(values[p] - centroids[best])) best = c;
      if (labels[p] != best) {
        labels[p] = best;
        changed = true;
      }
    }
    std::vector<double> sum(k, 0.0);
    std::vector<int> count(k, 0);
    for (int p = 0; p < n; ++p) {
      sum[labels[p]] += values[p];
      ++count[labels[p]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centroids[c] = sum[c] / count[c];
        continue;
      }
      int far = -1;
      double far_d = -1.0;
      for (int p = 0; p < n; ++p) {
        if (count[labels[p]] <= 1) continue;
        const double d = std::abs(values[p] - centroids[labels[p]]);
        if (d > far_d) {
          far_d = d;
          far = p;
        }
      }
      if (far < 0) continue;
      --count[labels[far]];
      labels[far] = c;
      count[c] = 1;
      centroids[c] = values[far];
      changed = true;
    }
    out.iterations = iter + 1;
    if (!changed) break;
  }
  out.labels = std::move(labels);
  out.centroids = std::move(centroids);
  return out;
}

inline double sse_1d(const std::vector<double>& values, const KMeansResult& r) {
  double s = 0.0;
  for (std::size_t p = 0; p < values.size(); ++p) {
    const double d = values[p] - r.centroids[r.labels[p]];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Lloyd's algorithm on scalars, restarted from `n_init` k-means++ seedings;
// the run with the lowest within-cluster sum of squares wins. The result
// always has min(k, n) non-empty clusters.
inline KMeansResult kmeans_1d(const std::vector<double>& values, int k, std::uint64_t seed, int max_iter = 300,
                              int n_init = 10) {
  if (k < 1) throw std::invalid_argument("kmeans_1d: k must be >= 1");
  if (n_init < 1) throw std::invalid_argument("kmeans_1d: n_init must be >= 1");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("kmeans_1d: non-finite value");
  const int n = static_cast<int>(values.size());
  KMeansResult out;
  if (n == 0) return out;
  k = std::min(k, n);

  std::mt19937_64 rng(seed);
  KMeansResult best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int run = 0; run < n_init; ++run) {
    auto r = detail::lloyd_1d(values, k, rng, max_iter);
    const double e = detail::sse_1d(values, r);
    if (e < best_sse) {
      best_sse = e;
      best = std::move(r);
    }
  }
  const auto& labels = best.labels;
  const auto& centroids = best.centroids;
  out.iterations = best.iterations;

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return centroids[a] < centroids[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) rank[order[r]] = r;
  out.labels.resize(n);
  for (int p = 0; p < n; ++p) out.labels[p] = rank[labels[p]];
  out.centroids.resize(k);
  for (int r = 0; r < k; ++r) out.centroids[r] = centroids[order[r]];
  return out;
}

enum class UsageGroup { kHigh, kLow };

using ClusterAssignment = std::map<std::string, UsageGroup>;

// Two-way split of services by average CPU usage (cores). The cluster with the
// larger centroid is High. With fewer than k services each service forms its
// own group; a lone service is High.
inline ClusterAssignment cluster_services(const std::map<std::string, double>& avg_cpu_usage, int k = 2,
                                          std::uint64_t seed = 0) {
  if (k != 2) throw std::invalid_argument("cluster_services: only k = 2 is supported");
  for (const auto& [id, u] : avg_cpu_usage)
    if (!(std::isfinite(u) && u >= 0.0)) throw std::invalid_argument("cluster_services: bad usage for " + id);
  ClusterAssignment out;
  if (avg_cpu_usage.size() < 2) {
    for (const auto& [id, u] : avg_cpu_usage) out.emplace(id, UsageGroup::kHigh);
    return out;
  }
  std::vector<std::string> ids;
  std::vector<double> usage;
  for (const auto& [id, u] : avg_cpu_usage) {
    ids.push_back(id);
    usage.push_back(u);
  }
  const auto km = kmeans_1d(usage, k, seed);
  for (std::size_t p = 0; p < ids.size(); ++p)
    out.emplace(ids[p], km.labels[p] == k - 1 ? UsageGroup::kHigh : UsageGroup::kLow);
  return out;
}

}  // namespace autothrottle::tower
