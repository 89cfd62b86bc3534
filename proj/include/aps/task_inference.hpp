#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aps/common.hpp"
#include "aps/features.hpp"

namespace aps {

/// No reward signal was observed, so the regression has no usable solution.
class DegenerateTaskError : public std::runtime_error {
 public:
  explicit DegenerateTaskError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

/// Solve M x = rhs (square, small) by Gaussian elimination with partial
/// pivoting. M is row-major n x n.
inline Vec solve_linear(std::vector<Vec> m, Vec rhs) {
  const int n = static_cast<int>(rhs.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    if (std::abs(m[pivot][col]) < 1e-300)
      throw NumericsError("solve_linear: singular system");
    std::swap(m[col], m[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    for (int r = col + 1; r < n; ++r) {
      const double f = m[r][col] / m[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) m[r][c] -= f * m[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  Vec x(static_cast<std::size_t>(n));
  for (int r = n - 1; r >= 0; --r) {
    double s = rhs[r];
    for (int c = r + 1; c < n; ++c) s -= m[r][c] * x[c];
    x[r] = s / m[r][r];
  }
  return x;
}

}  // namespace detail

/// Ridge regression by normal equations:
/// w = argmin_w sum_i (features_i . w - rewards_i)^2 + lambda ||w||^2.
inline Vec ridge_regression(const std::vector<Vec>& features, const Vec& rewards,
                            double lambda = 1e-6) {
  if (features.empty()) throw ContractViolation("ridge_regression: no samples");
  if (features.size() != rewards.size())
    throw ContractViolation("ridge_regression: feature/target count mismatch");
  const int d = static_cast<int>(features.front().size());
  std::vector<Vec> ata(d, Vec(static_cast<std::size_t>(d), 0.0));
  Vec atb(static_cast<std::size_t>(d), 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Vec& f = features[i];
    if (static_cast<int>(f.size()) != d)
      throw ContractViolation("ridge_regression: inconsistent feature dimension");
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) ata[r][c] += f[r] * f[c];
      atb[r] += f[r] * rewards[i];
    }
  }
  for (int r = 0; r < d; ++r) ata[r][r] += lambda;
  return detail::solve_linear(std::move(ata), std::move(atb));
}

/// Regression solution normalized to the unit sphere. A near-zero solution
/// (no reward ever observed, or reward orthogonal to the features) is
/// reported as a degenerate task.
inline TaskVector infer_task_vector(const std::vector<Vec>& features, const Vec& rewards,
                                    double lambda = 1e-6) {
  Vec w = ridge_regression(features, rewards, lambda);
  const double norm = l2_norm(w);
  if (norm < 1e-8)
    throw DegenerateTaskError(
        "task inference degenerate (no usable reward signal); rerun with a larger "
        "rollout budget");
  for (auto& x : w) x /= norm;
  return w;
}

}  // namespace aps
