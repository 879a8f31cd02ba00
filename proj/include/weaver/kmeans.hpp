#pragma once

#include <limits>
#include <numeric>

#include "weaver/common.hpp"

namespace weaver {

struct KMeansResult {
  std::vector<Vec> centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  std::size_t iters = 0;
  std::size_t padded = 0;  // centroids created by perturbing copies (|distinct points| < K)
};

namespace detail {

inline std::size_t nearest_centroid(const Vec& p, const std::vector<Vec>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids.size(); ++k) {
    const double d = squared_distance(p, centroids[k]);
    if (d < best_d) {  // strict: ties go to the smallest index
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding, run to assignment fixpoint or
/// max_iters. Empty clusters are re-seeded to the point currently farthest
/// from its assigned centroid. Deterministic in seed.
inline KMeansResult kmeans(const std::vector<Vec>& points, std::size_t k,
                           std::size_t max_iters, std::uint64_t seed) {
  if (points.empty()) throw Error("kmeans: no points");
  if (k == 0) throw Error("kmeans: k must be positive");
  const std::size_t n = points.size();
  const std::size_t dim = points[0].size();
  auto rng = std::mt19937_64(seed);

  KMeansResult res;

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  res.centroids.push_back(points[first(rng)]);
  Vec d2(n);
  while (res.centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = squared_distance(points[i],
                               res.centroids[detail::nearest_centroid(points[i], res.centroids)]);
      total += d2[i];
    }
    if (total <= 0.0) {
      // fewer distinct points than k: pad with a perturbed copy
      std::normal_distribution<double> jitter(0.0, 1e-6);
      Vec c = res.centroids[res.padded % res.centroids.size()];
      for (double& x : c) x += jitter(rng);
      res.centroids.push_back(std::move(c));
      ++res.padded;
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng), acc = 0.0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= r) {
        chosen = i;
        break;
      }
    }
    res.centroids.push_back(points[chosen]);
  }

  // Lloyd iterations
  res.assignment.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    res.assignment[i] = detail::nearest_centroid(points[i], res.centroids);

  for (res.iters = 0; res.iters < max_iters; ++res.iters) {
    // means
    std::vector<Vec> sums(k, Vec(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      axpy(1.0, points[i], sums[res.assignment[i]]);
      ++counts[res.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (double& x : sums[c]) x /= static_cast<double>(counts[c]);
      res.centroids[c] = std::move(sums[c]);
    }
    // empty clusters take the point farthest from its centroid
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far_i = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = squared_distance(points[i], res.centroids[res.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      res.centroids[c] = points[far_i];
      res.assignment[far_i] = c;
      counts[c] = 1;
    }
    // reassign; stop at fixpoint
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = detail::nearest_centroid(points[i], res.centroids);
      if (a != res.assignment[i]) {
        res.assignment[i] = a;
        changed = true;
      }
    }
    if (!changed) {
      ++res.iters;
      break;
    }
  }

  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    res.inertia += squared_distance(points[i], res.centroids[res.assignment[i]]);
  return res;
}

}  // namespace weaver
