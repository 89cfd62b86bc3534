#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aps/common.hpp"
#include "aps/config.hpp"
#include "aps/entropy.hpp"
#include "aps/features.hpp"
#include "aps/gridworld.hpp"
#include "aps/net.hpp"
#include "aps/replay.hpp"
#include "aps/rewards.hpp"
#include "aps/rng.hpp"
#include "aps/successor.hpp"
#include "aps/task_inference.hpp"

namespace aps {

struct EvalStats {
  double success_rate = 0.0;
  double mean_return = 0.0;
};

/// Roll `episodes` full episodes under `act` and aggregate success/return.
/// `act` is called as act(const Observation&, GridEnv&) -> action index.
template <class Policy>
EvalStats evaluate_policy(GridEnv& env, int episodes, Rng& rng, Policy&& act) {
  if (episodes < 1) throw ContractViolation("evaluate_policy: episodes must be >= 1");
  int successes = 0;
  double total_return = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Observation obs = env.reset(rng);
    bool done = false;
    while (!done) {
      const int a = act(obs, env);
      const StepResult r = env.step(a);
      total_return += r.reward;
      obs = r.obs;
      done = r.done;
    }
    if (env.reached_goal()) ++successes;
  }
  return {static_cast<double>(successes) / episodes, total_return / episodes};
}

// ---------------------------------------------------------------------------
// Learner batch pieces (free functions so tests can drive them directly)

/// Per-window intrinsic rewards, recomputed from the current encoder at
/// every call; nothing is cached in the buffer. The particle population is
/// the batch of window-head next-state features; tail elements of a window
/// are scored as queries against that same population.
struct IntrinsicBatch {
  ParticleBatch particles;           // one per window head
  std::vector<Vec> rewards;          // rewards[b][e], e indexes window elements
  double head_reward_mean = 0.0;     // convenience for metrics
};

inline IntrinsicBatch compute_intrinsic_rewards(
    const ReplayBuffer& buffer, const std::vector<std::vector<std::size_t>>& windows,
    const DenseNet& phi, RewardMode mode, int k) {
  if (mode == RewardMode::kExtrinsic)
    throw ContractViolation("compute_intrinsic_rewards: wrong phase for extrinsic mode");
  IntrinsicBatch out;
  out.particles.k = k;
  out.particles.particles.reserve(windows.size());

  ForwardScratch scratch;
  Vec obs_buf;
  auto encode_obs = [&](const Observation& o) {
    obs_buf.resize(static_cast<std::size_t>(o.dim()));
    o.write_to(obs_buf);
    return encode(phi, obs_buf, scratch);
  };

  for (const auto& win : windows) {
    if (win.empty()) throw ContractViolation("compute_intrinsic_rewards: empty window");
    out.particles.particles.push_back(encode_obs(buffer.get(win[0]).next_obs));
  }

  const bool uses_entropy = mode != RewardMode::kVisr;
  const bool uses_vmf = mode != RewardMode::kApt;
  out.rewards.resize(windows.size());
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const TaskVector& w = buffer.get(windows[b][0]).w;
    Vec& rs = out.rewards[b];
    rs.resize(windows[b].size());
    for (std::size_t e = 0; e < windows[b].size(); ++e) {
      if (e == 0) {
        rs[0] = intrinsic_reward(mode, out.particles.particles[b], w, out.particles,
                                 static_cast<int>(b));
      } else {
        const FeatureVector phi_next = encode_obs(buffer.get(windows[b][e]).next_obs);
        double r = 0.0;
        if (uses_vmf) r += dot(phi_next, w);
        if (uses_entropy) r += entropy_reward_query(out.particles, phi_next);
        rs[e] = r;
      }
    }
    out.head_reward_mean += rs[0];
  }
  out.head_reward_mean /= static_cast<double>(windows.size());
  return out;
}

/// Fine-tuning rewards: clipped extrinsic rewards read (and counted) through
/// the buffer accessor.
inline std::vector<Vec> compute_finetune_rewards(
    const ReplayBuffer& buffer, const std::vector<std::vector<std::size_t>>& windows) {
  std::vector<Vec> out(windows.size());
  for (std::size_t b = 0; b < windows.size(); ++b) {
    out[b].resize(windows[b].size());
    for (std::size_t e = 0; e < windows[b].size(); ++e)
      out[b][e] = clip_reward(buffer.extrinsic_reward(windows[b][e]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

/// Everything that must survive a checkpoint round trip.
struct PipelineCore {
  RunConfig cfg;
  DenseNet phi;
  AdamState phi_adam;
  SuccessorNet psi;
  AdamState psi_adam;
  Rng behavior_rng;
  Rng learner_rng;
  std::int64_t total_env_steps = 0;
  std::int64_t updates = 0;
  std::uint32_t episode_id = 0;
  std::uint32_t regime_id = 0;
  TaskVector w_task;                 // empty until task inference ran
  std::vector<TaskVector> gpi_set;   // empty until fine-tune setup
};

inline std::string resolve_map_text(const std::string& name) {
  if (name == "easy") return builtin_easy_map();
  if (name == "hard") return builtin_hard_map();
  std::ifstream f(name);
  if (!f) throw ConfigError("cannot open map file: " + name);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// One full run: reward-free pretraining, task inference by regression,
/// fine-tuning on clipped extrinsic reward, and evaluation. Strictly
/// single-threaded and a pure function of (config, seed).
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg)
      : core_(), env_(load_map(resolve_map_text(cfg.map)), cfg.episode_cap),
        buffer_(cfg.replay_capacity, cfg.min_replay) {
    cfg.validate();
    core_.cfg = std::move(cfg);
    const auto& c = core_.cfg;

    Rng init_rng(mix_seed(c.seed, kInitStream));
    core_.phi = make_encoder(env_.obs_dim(), c);
    init_uniform_fanin(core_.phi, init_rng);
    core_.psi = SuccessorNet::make(env_.obs_dim(), env_.n_actions(), c.feature_dim,
                                   c.psi_hidden, init_rng);
    core_.phi_adam = AdamState::for_net(core_.phi, c.lr_pretrain, c.adam_beta1,
                                        c.adam_beta2, c.adam_eps);
    core_.psi_adam = AdamState::for_net(core_.psi.online, c.lr_pretrain, c.adam_beta1,
                                        c.adam_beta2, c.adam_eps);
    core_.behavior_rng = Rng(mix_seed(c.seed, kBehaviorStream));
    core_.learner_rng = Rng(mix_seed(c.seed, kLearnerStream));
  }

  /// Resume from checkpointed state.
  explicit Pipeline(PipelineCore core)
      : core_(std::move(core)),
        env_(load_map(resolve_map_text(core_.cfg.map)), core_.cfg.episode_cap),
        buffer_(core_.cfg.replay_capacity, core_.cfg.min_replay) {
    core_.cfg.validate();
  }

  const RunConfig& config() const { return core_.cfg; }
  const PipelineCore& core() const { return core_; }
  PipelineCore& core() { return core_; }
  GridEnv& env() { return env_; }
  ReplayBuffer& buffer() { return buffer_; }
  std::uint64_t learner_extrinsic_reads() const { return learner_extrinsic_reads_; }
  std::uint64_t degenerate_encodes() const { return degenerate_encodes_; }

  double epsilon_at(std::int64_t phase_step) const {
    const auto& c = core_.cfg;
    if (phase_step >= c.eps_decay_steps) return c.eps_end;
    const double frac = static_cast<double>(phase_step) / c.eps_decay_steps;
    return c.eps_start + (c.eps_end - c.eps_start) * frac;
  }

  /// Reward-free pretraining (Q-learning on the mode's intrinsic reward).
  /// The learner never reads stored extrinsic rewards; episode returns are
  /// tracked on the environment path for logging only.
  void run_pretrain(Metrics& metrics) {
    const auto& c = core_.cfg;
    if (c.mode == RewardMode::kExtrinsic)
      throw ContractViolation("run_pretrain: pretraining needs aps, apt or visr mode");
    const std::uint64_t reads_before = buffer_.extrinsic_read_count();
    Interval interval;
    begin_episode(Phase::kPretrain);
    for (std::int64_t step = 1; step <= c.pretrain_steps; ++step) {
      const double eps = epsilon_at(step - 1);
      collect_step(Phase::kPretrain, eps, interval);
      if (buffer_.ready()) learner_step(Phase::kPretrain, interval);
      if (step % c.log_interval == 0) {
        metrics.add_row(step, "pretrain", c.mode, c.seed, interval.mean_intrinsic(),
                        interval.mean_return(), interval.mean_td(), interval.mean_vmf(),
                        eps, std::nullopt);
        interval = Interval{};
      }
    }
    learner_extrinsic_reads_ += buffer_.extrinsic_read_count() - reads_before;
  }

  /// Roll episodes under uniformly drawn task vectors, collect
  /// (phi(next state), extrinsic reward) pairs, and solve the ridge
  /// regression for the task vector. Throws DegenerateTaskError when no
  /// reward signal was seen.
  TaskVector infer_task() {
    const auto& c = core_.cfg;
    std::vector<Vec> feats;
    Vec rewards;
    ForwardScratch scratch;
    Vec obs_buf, in_buf;
    int total_steps = 0;
    for (int ep = 0; ep < c.infer_episodes && total_steps < c.infer_step_cap; ++ep) {
      const TaskVector w_ep = sample_task_vector(core_.behavior_rng, c.feature_dim);
      Observation obs = env_.reset(core_.behavior_rng);
      bool done = false;
      while (!done && total_steps < c.infer_step_cap) {
        const int a = act_on_task(obs, w_ep, c.infer_epsilon);
        const StepResult r = env_.step(a);
        obs_buf.resize(static_cast<std::size_t>(r.obs.dim()));
        r.obs.write_to(obs_buf);
        feats.push_back(encode(core_.phi, obs_buf, scratch));
        rewards.push_back(r.reward);
        obs = r.obs;
        done = r.done;
        ++total_steps;
      }
    }
    core_.w_task = infer_task_vector(feats, rewards);
    return core_.w_task;
  }

  /// Freeze the GPI policy set, reset the replay buffer and per-phase
  /// counters, and switch the optimizer to the fine-tuning learning rate.
  /// phi stays frozen for the whole phase.
  void setup_finetune(TaskVector w_task) {
    const auto& c = core_.cfg;
    if (!is_unit_norm(w_task, 1e-6))
      throw ContractViolation("setup_finetune: task vector must be unit norm");
    core_.w_task = std::move(w_task);
    core_.gpi_set.clear();
    for (int i = 0; i < c.gpi_policies; ++i)
      core_.gpi_set.push_back(sample_task_vector(core_.behavior_rng, c.feature_dim));
    buffer_ = ReplayBuffer(c.replay_capacity, c.min_replay);
    core_.psi_adam = AdamState::for_net(core_.psi.online, c.lr_finetune, c.adam_beta1,
                                        c.adam_beta2, c.adam_eps);
    core_.updates = 0;
    sync_target(core_.psi.online, core_.psi.target);
  }

  /// TD learning on clipped extrinsic rewards under the inferred task
  /// vector, acting by epsilon-greedy GPI. The epsilon decay spans the whole
  /// agent lifetime: having finished during pretraining, fine-tuning runs at
  /// the floor, so its data comes from the pretrained behavior rather than a
  /// second random-exploration phase.
  void run_finetune(Metrics& metrics) {
    const auto& c = core_.cfg;
    if (core_.w_task.empty() || (core_.gpi_set.empty() && c.gpi_policies > 0))
      throw ContractViolation("run_finetune: setup_finetune must run first");
    Interval interval;
    begin_episode(Phase::kFinetune);
    for (std::int64_t step = 1; step <= c.finetune_steps; ++step) {
      const double eps = c.eps_end;
      // linear learning-rate decay across the phase; the policy crystallizes
      // toward the end, which the greedy evaluation depends on
      const double frac = static_cast<double>(step - 1) /
                          static_cast<double>(std::max<std::int64_t>(c.finetune_steps, 1));
      core_.psi_adam.lr = c.lr_finetune + (c.lr_finetune_end - c.lr_finetune) * frac;
      collect_step(Phase::kFinetune, eps, interval);
      if (buffer_.ready()) learner_step(Phase::kFinetune, interval);
      if (step % c.log_interval == 0) {
        metrics.add_row(step, "finetune", c.mode, c.seed, std::nullopt,
                        interval.mean_return(), interval.mean_td(), std::nullopt, eps,
                        std::nullopt);
        interval = Interval{};
      }
    }
  }

  /// Greedy (eps = 0) GPI evaluation on a private environment and a
  /// deterministic per-seed evaluation stream, so evaluating never perturbs
  /// training state and repeated calls with unchanged parameters agree.
  EvalStats evaluate() {
    const auto& c = core_.cfg;
    if (core_.w_task.empty()) throw ContractViolation("evaluate: no task vector");
    Rng eval_rng(mix_seed(c.seed, kEvalStream));
    GridEnv env(env_.map(), c.episode_cap);
    Vec in_buf, obs_buf;
    ForwardScratch scratch;
    return evaluate_policy(env, c.eval_episodes, eval_rng,
                           [&](const Observation& obs, GridEnv&) {
                             obs_buf.resize(static_cast<std::size_t>(obs.dim()));
                             obs.write_to(obs_buf);
                             return gpi_action(core_.psi, obs_buf, core_.w_task,
                                               core_.gpi_set, in_buf, scratch);
                           });
  }

  struct FinetuneOutcome {
    EvalStats zero_shot;
    EvalStats finetuned;
    bool inference_degenerate = false;
  };

  /// The full post-pretraining pipeline: task inference, zero-shot
  /// evaluation, fine-tuning, final evaluation. A degenerate inference
  /// (no reward observed in the budget) falls back to a random task vector
  /// so multi-seed experiments keep their denominators.
  FinetuneOutcome run_finetune_pipeline(Metrics& metrics) {
    const auto& c = core_.cfg;
    FinetuneOutcome out;
    TaskVector w;
    try {
      w = infer_task();
    } catch (const DegenerateTaskError&) {
      out.inference_degenerate = true;
      w = sample_task_vector(core_.behavior_rng, c.feature_dim);
    }
    setup_finetune(std::move(w));
    out.zero_shot = evaluate();
    metrics.add_row(0, "zero_shot", c.mode, c.seed, std::nullopt,
                    out.zero_shot.mean_return, std::nullopt, std::nullopt, std::nullopt,
                    out.zero_shot.success_rate);
    run_finetune(metrics);
    out.finetuned = evaluate();
    metrics.add_row(c.finetune_steps, "finetuned", c.mode, c.seed, std::nullopt,
                    out.finetuned.mean_return, std::nullopt, std::nullopt, std::nullopt,
                    out.finetuned.success_rate);
    return out;
  }

  enum class Phase { kPretrain, kFinetune };

 private:
  static constexpr std::uint64_t kInitStream = 1;
  static constexpr std::uint64_t kBehaviorStream = 2;
  static constexpr std::uint64_t kLearnerStream = 3;
  static constexpr std::uint64_t kEvalStream = 4;

  static DenseNet make_encoder(int obs_dim, const RunConfig& c) {
    DenseNet net;
    int in = obs_dim;
    for (int h : c.phi_hidden) {
      net.add_layer(in, h, Activation::kElu);
      in = h;
    }
    net.add_layer(in, c.feature_dim, Activation::kIdentity);
    return net;
  }

  struct Interval {
    double intr_sum = 0.0;
    std::int64_t intr_n = 0;
    double td_sum = 0.0;
    std::int64_t td_n = 0;
    double vmf_sum = 0.0;
    std::int64_t vmf_n = 0;
    double return_sum = 0.0;
    std::int64_t episodes = 0;

    std::optional<double> mean_intrinsic() const {
      return intr_n ? std::optional<double>(intr_sum / intr_n) : std::nullopt;
    }
    std::optional<double> mean_td() const {
      return td_n ? std::optional<double>(td_sum / td_n) : std::nullopt;
    }
    std::optional<double> mean_vmf() const {
      return vmf_n ? std::optional<double>(vmf_sum / vmf_n) : std::nullopt;
    }
    std::optional<double> mean_return() const {
      return episodes ? std::optional<double>(return_sum / episodes) : std::nullopt;
    }
  };

  void begin_episode(Phase phase) {
    cur_obs_ = env_.reset(core_.behavior_rng);
    core_.episode_id += 1;
    core_.regime_id += 1;
    steps_in_regime_ = 0;
    step_in_episode_ = 0;
    episode_return_ = 0.0;
    if (phase == Phase::kPretrain)
      cur_w_ = sample_task_vector(core_.behavior_rng, core_.cfg.feature_dim);
    else
      cur_w_ = core_.w_task;
  }

  int act_on_task(const Observation& obs, const TaskVector& w, double eps) {
    obs_buf_.resize(static_cast<std::size_t>(obs.dim()));
    obs.write_to(obs_buf_);
    const SuccessorMatrix m = core_.psi.psi(core_.psi.online, obs_buf_, w, in_buf_, fwd_);
    const Vec q = q_values(m, w);
    return epsilon_greedy(q, eps, core_.behavior_rng);
  }

  int act_gpi(const Observation& obs, double eps) {
    if (core_.behavior_rng.uniform() < eps)
      return core_.behavior_rng.below(env_.n_actions());
    obs_buf_.resize(static_cast<std::size_t>(obs.dim()));
    obs.write_to(obs_buf_);
    return gpi_action(core_.psi, obs_buf_, core_.w_task, core_.gpi_set, in_buf_, fwd_);
  }

  void collect_step(Phase phase, double eps, Interval& interval) {
    const int a = phase == Phase::kPretrain ? act_on_task(cur_obs_, cur_w_, eps)
                                            : act_gpi(cur_obs_, eps);
    const StepResult r = env_.step(a);
    Transition t;
    t.obs = cur_obs_;
    t.action = a;
    t.next_obs = r.obs;
    t.done = r.done;
    t.w = cur_w_;
    t.episode_id = core_.episode_id;
    t.step_index = static_cast<std::uint32_t>(step_in_episode_);
    t.regime_id = core_.regime_id;
    t.extrinsic_reward_raw = r.reward;
    buffer_.push(std::move(t));

    episode_return_ += r.reward;
    core_.total_env_steps += 1;
    step_in_episode_ += 1;
    steps_in_regime_ += 1;
    cur_obs_ = r.obs;

    if (r.done) {
      interval.return_sum += episode_return_;
      interval.episodes += 1;
      begin_episode(phase);
    } else if (phase == Phase::kPretrain &&
               steps_in_regime_ >= core_.cfg.w_resample_period) {
      core_.regime_id += 1;
      steps_in_regime_ = 0;
      cur_w_ = sample_task_vector(core_.behavior_rng, core_.cfg.feature_dim);
    }
  }

  void learner_step(Phase phase, Interval& interval) {
    const auto& c = core_.cfg;
    const auto heads = buffer_.sample_indices(static_cast<std::size_t>(c.batch_size),
                                              core_.learner_rng);
    std::vector<std::vector<std::size_t>> windows(heads.size());
    for (std::size_t b = 0; b < heads.size(); ++b)
      windows[b] = buffer_.window_from(heads[b], c.nstep);

    std::vector<Vec> rewards;
    const bool train_phi = phase == Phase::kPretrain && c.mode != RewardMode::kApt;
    if (phase == Phase::kPretrain) {
      IntrinsicBatch ib =
          compute_intrinsic_rewards(buffer_, windows, core_.phi, c.mode, c.k);
      rewards = std::move(ib.rewards);
      interval.intr_sum += ib.head_reward_mean;
      interval.intr_n += 1;
      if (train_phi) {
        // VMF NLL on the heads' current observations under their stored w
        if (phi_bundle_.wt.empty()) phi_bundle_ = GradientBundle::zeros_like(core_.phi);
        phi_bundle_.zero();
        phi_traces_.resize(heads.size());
        std::vector<Vec> raws(heads.size());
        std::vector<TaskVector> ws(heads.size());
        for (std::size_t b = 0; b < heads.size(); ++b) {
          const Transition& head = buffer_.get(heads[b]);
          obs_buf_.resize(static_cast<std::size_t>(head.obs.dim()));
          head.obs.write_to(obs_buf_);
          raws[b] = forward_trace(core_.phi, obs_buf_, phi_traces_[b]);
          ws[b] = head.w;
        }
        const VmfLossResult vmf = vmf_nll_loss(raws, ws);
        if (!std::isfinite(vmf.loss))
          throw NumericsError("pretrain: non-finite VMF loss at update " +
                              std::to_string(core_.updates));
        for (std::size_t b = 0; b < heads.size(); ++b)
          backward_acc(core_.phi, phi_traces_[b], vmf.d_raw[b], phi_bundle_);
        interval.vmf_sum += vmf.loss;
        interval.vmf_n += 1;
      }
    } else {
      rewards = compute_finetune_rewards(buffer_, windows);
    }

    // TD step on psi with Double-Q bootstrap: argmax from the online net,
    // value from the target net, no gradient through either.
    //
    // Pretraining trains the stored-w slice. Fine-tuning trains every GPI
    // conditioning slice (w_task plus the frozen set) on the same windows,
    // each with its own bootstrap and all projected on w_task: otherwise the
    // frozen slices keep their pretraining-scale values and the GPI max
    // never reflects what fine-tuning learned.
    if (psi_bundle_.wt.empty()) psi_bundle_ = GradientBundle::zeros_like(core_.psi.online);
    psi_bundle_.zero();
    double loss_sum = 0.0;
    std::int64_t loss_terms = 0;
    const double inv_b = 1.0 / static_cast<double>(heads.size());
    std::vector<const TaskVector*> contexts;
    const int d = core_.psi.d;
    for (std::size_t b = 0; b < heads.size(); ++b) {
      const Transition& head = buffer_.get(heads[b]);
      const Transition& last = buffer_.get(windows[b].back());
      const TaskVector& w_proj = head.w;  // value projection vector

      contexts.clear();
      contexts.push_back(&head.w);
      if (phase == Phase::kFinetune)
        for (const auto& w_i : core_.gpi_set) contexts.push_back(&w_i);

      const bool bootstrapped = !last.done;
      if (bootstrapped) {
        next_buf_.resize(static_cast<std::size_t>(last.next_obs.dim()));
        last.next_obs.write_to(next_buf_);
      }
      obs_buf_.resize(static_cast<std::size_t>(head.obs.dim()));
      head.obs.write_to(obs_buf_);

      for (const TaskVector* w_cond : contexts) {
        double bootstrap = 0.0;
        if (bootstrapped) {
          const SuccessorMatrix on =
              core_.psi.psi(core_.psi.online, next_buf_, *w_cond, in_buf_, fwd_);
          const int a_star = argmax(q_values(on, w_proj));
          const SuccessorMatrix tg =
              core_.psi.psi(core_.psi.target, next_buf_, *w_cond, in_buf_, fwd_);
          bootstrap = dot(tg.row(a_star), w_proj);
        }
        const double y = nstep_target(rewards[b], c.gamma, bootstrap);
        if (!std::isfinite(y))
          throw NumericsError("learner: non-finite TD target at update " +
                              std::to_string(core_.updates));

        core_.psi.make_input(obs_buf_, *w_cond, in_buf_);
        forward_trace(core_.psi.online, in_buf_, psi_trace_);
        const Vec& out = psi_trace_.post.back();
        double q = 0.0;
        for (int j = 0; j < d; ++j) q += out[head.action * d + j] * w_proj[j];
        const TdLoss td = td_loss(q, y);
        loss_sum += td.loss;
        loss_terms += 1;
        ograd_.assign(out.size(), 0.0);
        for (int j = 0; j < d; ++j)
          ograd_[head.action * d + j] = td.d_q * inv_b * w_proj[j];
        backward_acc(core_.psi.online, psi_trace_, ograd_, psi_bundle_);
      }
    }

    clip_grad_norm(psi_bundle_, c.max_grad_norm);
    adam_step(core_.psi.online, psi_bundle_, core_.psi_adam);
    if (train_phi) {
      clip_grad_norm(phi_bundle_, c.max_grad_norm);
      adam_step(core_.phi, phi_bundle_, core_.phi_adam);
    }
    core_.updates += 1;
    if (core_.updates % c.target_period == 0)
      sync_target(core_.psi.online, core_.psi.target);

    interval.td_sum += loss_sum / static_cast<double>(loss_terms);
    interval.td_n += 1;
  }

  PipelineCore core_;
  GridEnv env_;
  ReplayBuffer buffer_;

  Observation cur_obs_;
  TaskVector cur_w_;
  int steps_in_regime_ = 0;
  int step_in_episode_ = 0;
  double episode_return_ = 0.0;
  std::uint64_t learner_extrinsic_reads_ = 0;
  std::uint64_t degenerate_encodes_ = 0;

  // preallocated scratch for the hot loops
  Vec obs_buf_, next_buf_, in_buf_, ograd_;
  ForwardScratch fwd_;
  ForwardTrace psi_trace_;
  std::vector<ForwardTrace> phi_traces_;
  GradientBundle phi_bundle_, psi_bundle_;
};

}  // namespace aps
