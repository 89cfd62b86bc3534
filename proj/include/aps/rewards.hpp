#pragma once

#include <algorithm>
#include <string>

#include "aps/common.hpp"
#include "aps/entropy.hpp"
#include "aps/features.hpp"

namespace aps {

/// Which reward signal drives learning in a given run phase.
enum class RewardMode { kAps, kApt, kVisr, kExtrinsic };

inline std::string to_string(RewardMode m) {
  switch (m) {
    case RewardMode::kAps: return "aps";
    case RewardMode::kApt: return "apt";
    case RewardMode::kVisr: return "visr";
    case RewardMode::kExtrinsic: return "extrinsic";
  }
  throw ContractViolation("unknown reward mode");
}

inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "aps") return RewardMode::kAps;
  if (s == "apt") return RewardMode::kApt;
  if (s == "visr") return RewardMode::kVisr;
  if (s == "extrinsic") return RewardMode::kExtrinsic;
  throw ContractViolation("unknown reward mode '" + s + "'");
}

/// Pretraining reward for the transition whose encoded next state is
/// particle i of the batch:
///   aps  = phi(s')^T w + log(1 + mean k-NN distance)
///   apt  =               log(1 + mean k-NN distance)
///   visr = phi(s')^T w
/// The aps value is exactly the sum of the other two.
inline double intrinsic_reward(RewardMode mode, const FeatureVector& phi_next,
                               const TaskVector& w, const ParticleBatch& batch, int i) {
  switch (mode) {
    case RewardMode::kVisr:
      return dot(phi_next, w);
    case RewardMode::kApt:
      return entropy_reward(batch, i);
    case RewardMode::kAps:
      return dot(phi_next, w) + entropy_reward(batch, i);
    case RewardMode::kExtrinsic:
      throw ContractViolation("intrinsic_reward: extrinsic mode has no intrinsic reward");
  }
  throw ContractViolation("unknown reward mode");
}

/// Fine-tuning phase reward clipping to [-1, 1].
inline double clip_reward(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace aps
