#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "aps/common.hpp"
#include "aps/features.hpp"
#include "aps/net.hpp"
#include "aps/rng.hpp"

namespace aps {

/// psi(s, ., w) for one (state, task) pair: one row of d successor-feature
/// values per action. Q(s, a | w) = row_a . w.
struct SuccessorMatrix {
  int n_actions = 0;
  int d = 0;
  Vec data;  // row major, [n_actions][d]

  std::span<const double> row(int a) const {
    return {data.data() + static_cast<std::size_t>(a) * d, static_cast<std::size_t>(d)};
  }
};

/// Task-conditioned successor feature network (a UVFA): a DenseNet mapping
/// concat(obs, w) to |A| x d values, with a paired target copy for TD
/// bootstrapping.
struct SuccessorNet {
  DenseNet online;
  DenseNet target;
  int n_actions = 0;
  int d = 0;

  /// Trunk of `hidden` ReLU layers, then d independent linear heads of width
  /// |A| realized as one affine map onto the [|A| x d] output block.
  static SuccessorNet make(int obs_dim, int n_actions, int d,
                           const std::vector<int>& hidden, Rng& rng) {
    SuccessorNet net;
    net.n_actions = n_actions;
    net.d = d;
    int in = obs_dim + d;
    for (int h : hidden) {
      net.online.add_layer(in, h, Activation::kRelu);
      in = h;
    }
    net.online.add_layer(in, n_actions * d, Activation::kIdentity);
    init_uniform_fanin(net.online, rng);
    net.target = net.online;
    return net;
  }

  int obs_dim() const { return online.input_dim() - d; }

  /// Build the concatenated (obs, w) input in `buf` and return a span of it.
  std::span<const double> make_input(std::span<const double> obs,
                                     std::span<const double> w, Vec& buf) const {
    if (static_cast<int>(obs.size()) + static_cast<int>(w.size()) != online.input_dim())
      throw ContractViolation("SuccessorNet: obs+w size does not match network input");
    buf.resize(obs.size() + w.size());
    std::copy(obs.begin(), obs.end(), buf.begin());
    std::copy(w.begin(), w.end(), buf.begin() + static_cast<std::ptrdiff_t>(obs.size()));
    return buf;
  }

  SuccessorMatrix psi(const DenseNet& which, std::span<const double> obs,
                      std::span<const double> w, Vec& input_buf,
                      ForwardScratch& scratch) const {
    const Vec& out = forward(which, make_input(obs, w, input_buf), scratch);
    SuccessorMatrix m;
    m.n_actions = n_actions;
    m.d = d;
    m.data = out;
    return m;
  }
};

/// Q[a] = psi_row_a . w
inline Vec q_values(const SuccessorMatrix& psi, const TaskVector& w) {
  if (static_cast<int>(w.size()) != psi.d)
    throw ContractViolation("q_values: task vector dimension mismatch");
  Vec q(static_cast<std::size_t>(psi.n_actions));
  for (int a = 0; a < psi.n_actions; ++a) q[a] = dot(psi.row(a), w);
  return q;
}

/// With probability eps a uniform action, otherwise the lowest-index argmax.
/// Consumes one uniform draw always and a second only on the explore branch.
inline int epsilon_greedy(std::span<const double> q, double eps, Rng& rng) {
  if (q.empty()) throw ContractViolation("epsilon_greedy: empty value vector");
  if (eps < 0.0 || eps > 1.0) throw ContractViolation("epsilon_greedy: eps out of [0,1]");
  if (rng.uniform() < eps) return rng.below(static_cast<int>(q.size()));
  return argmax(q);
}

/// n-step discounted return: sum_l gamma^l r_l + gamma^n * bootstrap.
/// Callers truncating at an episode end pass bootstrap = 0.
inline double nstep_target(std::span<const double> rewards, double gamma, double bootstrap) {
  if (rewards.empty()) throw ContractViolation("nstep_target: empty reward window");
  if (gamma < 0.0 || gamma >= 1.0) throw ContractViolation("nstep_target: gamma out of [0,1)");
  double y = 0.0;
  double g = 1.0;
  for (double r : rewards) {
    y += g * r;
    g *= gamma;
  }
  return y + g * bootstrap;
}

struct TdLoss {
  double loss = 0.0;
  double d_q = 0.0;  // dLoss / dQ at the prediction
};

/// Squared error on the scalar Q = psi(s,a,w)^T w against a constant target.
inline TdLoss td_loss(double q_prediction, double target) {
  if (!std::isfinite(target)) throw NumericsError("td_loss: non-finite target");
  TdLoss out;
  const double delta = q_prediction - target;
  out.loss = delta * delta;
  out.d_q = 2.0 * delta;
  return out;
}

/// Generalized policy improvement over a set of conditioning vectors:
/// a* = argmax_a max_{w_i in policies (plus w_task)} psi(obs, a, w_i)^T w_task,
/// ties toward the lower action index. Evaluates the online network.
inline int gpi_action(const SuccessorNet& net, std::span<const double> obs,
                      const TaskVector& w_task, const std::vector<TaskVector>& policies,
                      Vec& input_buf, ForwardScratch& scratch) {
  if (policies.empty() && w_task.empty())
    throw ContractViolation("gpi_action: no conditioning vectors");
  Vec best_q(static_cast<std::size_t>(net.n_actions),
             -std::numeric_limits<double>::infinity());
  auto consider = [&](const TaskVector& w_cond) {
    const SuccessorMatrix m = net.psi(net.online, obs, w_cond, input_buf, scratch);
    for (int a = 0; a < net.n_actions; ++a) {
      const double q = dot(m.row(a), w_task);
      if (q > best_q[a]) best_q[a] = q;
    }
  };
  consider(w_task);
  for (const auto& w_i : policies) consider(w_i);
  return argmax(best_q);
}

inline int gpi_action(const SuccessorNet& net, std::span<const double> obs,
                      const TaskVector& w_task, const std::vector<TaskVector>& policies) {
  Vec buf;
  ForwardScratch scratch;
  return gpi_action(net, obs, w_task, policies, buf, scratch);
}

}  // namespace aps
