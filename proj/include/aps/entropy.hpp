#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "aps/common.hpp"

namespace aps {

/// A minibatch of encoded next-states ("particles") plus the neighbor count k.
struct ParticleBatch {
  std::vector<Vec> particles;
  int k = 10;

  std::size_t size() const { return particles.size(); }
};

/// Indices of the k particles nearest to particle i (excluding i itself),
/// ordered by increasing distance; equal distances break toward the lower
/// index. Exhaustive scan: exact, and cheap at minibatch scale.
inline std::vector<int> knn_neighbors(const ParticleBatch& batch, int i) {
  const int n = static_cast<int>(batch.size());
  if (i < 0 || i >= n) throw ContractViolation("knn_neighbors: index out of range");
  if (batch.k < 1) throw ContractViolation("knn_neighbors: k must be >= 1");
  if (n < batch.k + 1)
    throw ContractViolation("knn_neighbors: batch size " + std::to_string(n) +
                            " too small for k = " + std::to_string(batch.k));
  std::vector<std::pair<double, int>> dists;
  dists.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    dists.emplace_back(squared_distance(batch.particles[i], batch.particles[j]), j);
  }
  std::partial_sort(dists.begin(), dists.begin() + batch.k, dists.end());
  std::vector<int> out(batch.k);
  for (int j = 0; j < batch.k; ++j) out[j] = dists[j].second;
  return out;
}

/// Mean Euclidean distance from particle i to its k nearest neighbors.
inline double mean_knn_distance(const ParticleBatch& batch, int i) {
  const auto nbrs = knn_neighbors(batch, i);
  double s = 0.0;
  for (int j : nbrs) s += std::sqrt(squared_distance(batch.particles[i], batch.particles[j]));
  return s / static_cast<double>(batch.k);
}

/// Particle entropy bonus: log(1 + mean distance to the k nearest
/// neighbors). Zero exactly when the k nearest neighbors coincide with the
/// particle; strictly increasing in every neighbor distance.
inline double entropy_reward(const ParticleBatch& batch, int i) {
  return std::log1p(mean_knn_distance(batch, i));
}

/// Same bonus for a query point that is not a member of the batch: the k
/// nearest neighbors are searched over all batch particles. Equivalent to
/// appending the query to the batch and scoring it.
inline double entropy_reward_query(const ParticleBatch& batch, std::span<const double> query) {
  const int n = static_cast<int>(batch.size());
  if (batch.k < 1) throw ContractViolation("entropy_reward_query: k must be >= 1");
  if (n < batch.k)
    throw ContractViolation("entropy_reward_query: batch smaller than k");
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) d2[j] = squared_distance(query, batch.particles[j]);
  std::partial_sort(d2.begin(), d2.begin() + batch.k, d2.end());
  double s = 0.0;
  for (int j = 0; j < batch.k; ++j) s += std::sqrt(d2[j]);
  return std::log1p(s / static_cast<double>(batch.k));
}

}  // namespace aps
