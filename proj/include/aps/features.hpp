#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "aps/common.hpp"
#include "aps/net.hpp"
#include "aps/rng.hpp"

namespace aps {

constexpr int kFeatureDim = 5;
constexpr double kNormFloor = 1e-8;

/// Unit-norm task vector w; doubles as the policy conditioning variable.
using TaskVector = Vec;
/// Unit-norm encoder output phi(s).
using FeatureVector = Vec;

inline bool is_unit_norm(std::span<const double> v, double tol = 1e-9) {
  return std::abs(l2_norm(v) - 1.0) <= tol;
}

/// v / max(||v||, 1e-8). The floor keeps a pathological zero output from
/// producing NaNs; callers can watch `degenerate` to log such events.
inline Vec normalize_feature(std::span<const double> raw, bool* degenerate = nullptr) {
  const double norm = l2_norm(raw);
  const double denom = std::max(norm, kNormFloor);
  if (degenerate) *degenerate = norm < kNormFloor;
  Vec out(raw.begin(), raw.end());
  for (auto& x : out) x /= denom;
  return out;
}

/// Encoder forward: net output, then L2 normalization.
inline FeatureVector encode(const DenseNet& net, std::span<const double> obs,
                            ForwardScratch& scratch, bool* degenerate = nullptr) {
  const Vec& raw = forward(net, obs, scratch);
  return normalize_feature(raw, degenerate);
}

inline FeatureVector encode(const DenseNet& net, std::span<const double> obs) {
  ForwardScratch s;
  return encode(net, obs, s);
}

/// Backpropagate a gradient through y = v / max(||v||, 1e-8).
/// `raw` is the pre-normalization vector, `dout` the gradient w.r.t. y.
inline Vec normalize_backward(std::span<const double> raw, std::span<const double> dout) {
  const double norm = l2_norm(raw);
  const double denom = std::max(norm, kNormFloor);
  Vec din(raw.size(), 0.0);
  if (norm < kNormFloor) {
    // denominator pinned at the floor: y = v / 1e-8 is linear
    for (std::size_t i = 0; i < raw.size(); ++i) din[i] = dout[i] / denom;
    return din;
  }
  // y = v/||v||: dv = (g - (g.y) y) / ||v||
  Vec y(raw.begin(), raw.end());
  for (auto& x : y) x /= denom;
  const double gy = dot(dout, y);
  for (std::size_t i = 0; i < raw.size(); ++i) din[i] = (dout[i] - gy * y[i]) / denom;
  return din;
}

struct VmfLossResult {
  double loss = 0.0;
  /// Gradients w.r.t. the raw (pre-normalization) encoder outputs.
  std::vector<Vec> d_raw;
};

/// Von Mises-Fisher negative log likelihood, up to the constant term:
/// loss = -mean_b phi_b^T w_b, with phi_b the normalized raw_b.
inline VmfLossResult vmf_nll_loss(const std::vector<Vec>& raw_batch,
                                  const std::vector<TaskVector>& w_batch) {
  if (raw_batch.empty()) throw ContractViolation("vmf_nll_loss: empty batch");
  if (raw_batch.size() != w_batch.size())
    throw ContractViolation("vmf_nll_loss: batch and task vector counts differ");
  VmfLossResult res;
  res.d_raw.resize(raw_batch.size());
  const double inv_b = 1.0 / static_cast<double>(raw_batch.size());
  for (std::size_t b = 0; b < raw_batch.size(); ++b) {
    if (raw_batch[b].size() != w_batch[b].size())
      throw ContractViolation("vmf_nll_loss: feature/task dimension mismatch");
    const Vec phi = normalize_feature(raw_batch[b]);
    res.loss -= inv_b * dot(phi, w_batch[b]);
    Vec dphi(w_batch[b].size());
    for (std::size_t i = 0; i < dphi.size(); ++i) dphi[i] = -inv_b * w_batch[b][i];
    res.d_raw[b] = normalize_backward(raw_batch[b], dphi);
  }
  return res;
}

/// Single shared task vector for the whole batch.
inline VmfLossResult vmf_nll_loss(const std::vector<Vec>& raw_batch, const TaskVector& w) {
  return vmf_nll_loss(raw_batch, std::vector<TaskVector>(raw_batch.size(), w));
}

/// Draw w uniformly on the unit sphere: d independent standard normals,
/// L2 normalized. An all-zero draw (probability zero) is redrawn.
inline TaskVector sample_task_vector(Rng& rng, int d = kFeatureDim) {
  if (d < 1) throw ContractViolation("sample_task_vector: d must be >= 1");
  TaskVector w(static_cast<std::size_t>(d));
  double norm = 0.0;
  do {
    for (auto& x : w) x = rng.normal();
    norm = l2_norm(w);
  } while (norm < kNormFloor);
  for (auto& x : w) x /= norm;
  return w;
}

}  // namespace aps
