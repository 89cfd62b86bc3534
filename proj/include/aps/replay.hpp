#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "aps/common.hpp"
#include "aps/features.hpp"
#include "aps/gridworld.hpp"
#include "aps/rng.hpp"

namespace aps {

/// One environment step as stored for replay. The task vector is the one
/// that was active when the step was collected; regime_id changes whenever
/// w is resampled or an episode starts, so multi-step windows can refuse to
/// cross either boundary.
struct Transition {
  Observation obs;
  int action = 0;
  Observation next_obs;
  bool done = false;
  TaskVector w;
  std::uint32_t episode_id = 0;
  std::uint32_t step_index = 0;  // step within the episode
  std::uint32_t regime_id = 0;

  double extrinsic_reward_raw = 0.0;  // read through ReplayBuffer::extrinsic_reward
};

/// Bounded FIFO of transitions. Evicts strictly oldest-first and refuses to
/// sample until the minimum fill is reached.
///
/// Extrinsic rewards are deliberately gated behind an access-counting getter:
/// reward-free pretraining is checked by asserting the learner performed
/// zero such reads.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t min_fill)
      : capacity_(capacity), min_fill_(min_fill) {
    if (capacity_ == 0) throw ContractViolation("ReplayBuffer: zero capacity");
  }

  void push(Transition t) {
    if (data_.size() == capacity_) data_.pop_front();
    data_.push_back(std::move(t));
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t min_fill() const { return min_fill_; }
  bool ready() const { return data_.size() >= min_fill_; }

  const Transition& get(std::size_t i) const {
    if (i >= data_.size()) throw ContractViolation("ReplayBuffer::get: index out of range");
    return data_[i];
  }

  double extrinsic_reward(std::size_t i) const {
    extrinsic_reads_ += 1;
    return get(i).extrinsic_reward_raw;
  }

  std::uint64_t extrinsic_read_count() const { return extrinsic_reads_; }

  /// Uniform indices over the current contents.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (!ready())
      throw ContractViolation("ReplayBuffer: sampling below minimum fill (" +
                              std::to_string(data_.size()) + " < " +
                              std::to_string(min_fill_) + ")");
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = static_cast<std::size_t>(rng.below(static_cast<int>(data_.size())));
    return out;
  }

  /// Indices [start, start+1, ...] of the multi-step window beginning at
  /// `start`: at most `nstep` transitions, all in the same episode and the
  /// same task regime, stopping after a terminal transition or at the
  /// newest buffered transition.
  std::vector<std::size_t> window_from(std::size_t start, int nstep) const {
    if (start >= data_.size()) throw ContractViolation("window_from: index out of range");
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(nstep));
    const Transition& head = data_[start];
    for (std::size_t i = start; i < data_.size() && out.size() < static_cast<std::size_t>(nstep);
         ++i) {
      const Transition& t = data_[i];
      if (t.episode_id != head.episode_id || t.regime_id != head.regime_id) break;
      out.push_back(i);
      if (t.done) break;
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t min_fill_;
  std::deque<Transition> data_;
  mutable std::uint64_t extrinsic_reads_ = 0;
};

}  // namespace aps
