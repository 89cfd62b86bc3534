#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "aps/common.hpp"
#include "aps/rewards.hpp"

namespace aps {

/// Bad key, bad value or otherwise unusable configuration. The CLI maps
/// this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything a single run needs. Defaults are the gridworld experiment
/// settings; flat key=value files and CLI flags override them.
struct RunConfig {
  RewardMode mode = RewardMode::kAps;
  std::string map = "easy";  // easy | hard | path to a map file
  std::uint64_t seed = 1;

  std::int64_t pretrain_steps = 200000;
  std::int64_t finetune_steps = 10000;
  int infer_episodes = 10;
  int infer_step_cap = 2000;
  int eval_episodes = 50;

  double gamma = 0.99;
  int batch_size = 32;
  int nstep = 10;
  int k = 10;  // particle neighbor count; {3, 5, 10} are the searched values

  double lr_pretrain = 1e-4;
  double lr_finetune = 1e-3;
  double lr_finetune_end = 0.0;  // linear decay target across the phase
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 0.00015;
  double max_grad_norm = 10.0;

  int target_period = 100;
  int w_resample_period = 10;
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_steps = 2500;
  double infer_epsilon = 0.2;

  int gpi_policies = 10;
  std::size_t replay_capacity = 100000;
  std::size_t min_replay = 1600;

  int feature_dim = 5;
  std::vector<int> phi_hidden = {32, 32};
  std::vector<int> psi_hidden = {64};

  int episode_cap = 200;
  std::int64_t log_interval = 1000;

  void validate() const {
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("gamma must be in [0, 1)");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (k < 1 || k >= batch_size) throw ConfigError("k must satisfy 1 <= k < batch_size");
    if (nstep < 1) throw ConfigError("nstep must be >= 1");
    if (target_period < 1) throw ConfigError("target_period must be >= 1");
    if (w_resample_period < 1) throw ConfigError("w_resample_period must be >= 1");
    if (eps_decay_steps < 1) throw ConfigError("eps_decay_steps must be >= 1");
    if (eps_start < 0 || eps_start > 1 || eps_end < 0 || eps_end > 1)
      throw ConfigError("epsilon endpoints must be in [0, 1]");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (replay_capacity == 0) throw ConfigError("replay_capacity must be > 0");
    if (min_replay < static_cast<std::size_t>(batch_size))
      throw ConfigError("min_replay must be >= batch_size");
    if (episode_cap < 1) throw ConfigError("episode_cap must be >= 1");
    if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
    if (gpi_policies < 0) throw ConfigError("gpi_policies must be >= 0");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (phi_hidden.empty() || psi_hidden.empty())
      throw ConfigError("phi_hidden and psi_hidden must be non-empty");
  }
};

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad value for " + key + ": '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("bad value for " + key + ": empty list");
  return out;
}

template <typename T>
inline T parse_number(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    if constexpr (std::is_floating_point_v<T>) {
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return static_cast<T>(v);
    } else {
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return static_cast<T>(v);
    }
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + s + "'");
  }
}

}  // namespace detail

/// Apply one key=value assignment. Unknown keys are reported by name.
inline void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "mode") {
    try {
      cfg.mode = reward_mode_from_string(value);
    } catch (const ContractViolation&) {
      throw ConfigError("bad value for mode: '" + value + "' (want aps|apt|visr)");
    }
    if (cfg.mode == RewardMode::kExtrinsic)
      throw ConfigError("bad value for mode: '" + value + "' (want aps|apt|visr)");
  } else if (key == "map") cfg.map = value;
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "pretrain_steps") cfg.pretrain_steps = parse_number<std::int64_t>(key, value);
  else if (key == "finetune_steps") cfg.finetune_steps = parse_number<std::int64_t>(key, value);
  else if (key == "infer_episodes") cfg.infer_episodes = parse_number<int>(key, value);
  else if (key == "infer_step_cap") cfg.infer_step_cap = parse_number<int>(key, value);
  else if (key == "eval_episodes") cfg.eval_episodes = parse_number<int>(key, value);
  else if (key == "gamma") cfg.gamma = parse_number<double>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
  else if (key == "nstep") cfg.nstep = parse_number<int>(key, value);
  else if (key == "k") cfg.k = parse_number<int>(key, value);
  else if (key == "lr_pretrain") cfg.lr_pretrain = parse_number<double>(key, value);
  else if (key == "lr_finetune") cfg.lr_finetune = parse_number<double>(key, value);
  else if (key == "lr_finetune_end") cfg.lr_finetune_end = parse_number<double>(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") cfg.adam_eps = parse_number<double>(key, value);
  else if (key == "max_grad_norm") cfg.max_grad_norm = parse_number<double>(key, value);
  else if (key == "target_period") cfg.target_period = parse_number<int>(key, value);
  else if (key == "w_resample_period") cfg.w_resample_period = parse_number<int>(key, value);
  else if (key == "eps_start") cfg.eps_start = parse_number<double>(key, value);
  else if (key == "eps_end") cfg.eps_end = parse_number<double>(key, value);
  else if (key == "eps_decay_steps") cfg.eps_decay_steps = parse_number<int>(key, value);
  else if (key == "infer_epsilon") cfg.infer_epsilon = parse_number<double>(key, value);
  else if (key == "gpi_policies") cfg.gpi_policies = parse_number<int>(key, value);
  else if (key == "replay_capacity") cfg.replay_capacity = parse_number<std::size_t>(key, value);
  else if (key == "min_replay") cfg.min_replay = parse_number<std::size_t>(key, value);
  else if (key == "feature_dim") cfg.feature_dim = parse_number<int>(key, value);
  else if (key == "phi_hidden") cfg.phi_hidden = detail::parse_int_list(key, value);
  else if (key == "psi_hidden") cfg.psi_hidden = detail::parse_int_list(key, value);
  else if (key == "episode_cap") cfg.episode_cap = parse_number<int>(key, value);
  else if (key == "log_interval") cfg.log_interval = parse_number<std::int64_t>(key, value);
  else throw ConfigError("unknown config key: " + key);
}

/// Parse a flat key=value config text ('#' starts a comment line).
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config_set(base, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return base;
}

/// Canonical serialization: every key, fixed order. parse(serialize(c)) == c.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "mode=" << to_string(c.mode) << "\n"
     << "map=" << c.map << "\n"
     << "seed=" << c.seed << "\n"
     << "pretrain_steps=" << c.pretrain_steps << "\n"
     << "finetune_steps=" << c.finetune_steps << "\n"
     << "infer_episodes=" << c.infer_episodes << "\n"
     << "infer_step_cap=" << c.infer_step_cap << "\n"
     << "eval_episodes=" << c.eval_episodes << "\n"
     << "gamma=" << c.gamma << "\n"
     << "batch_size=" << c.batch_size << "\n"
     << "nstep=" << c.nstep << "\n"
     << "k=" << c.k << "\n"
     << "lr_pretrain=" << c.lr_pretrain << "\n"
     << "lr_finetune=" << c.lr_finetune << "\n"
     << "lr_finetune_end=" << c.lr_finetune_end << "\n"
     << "adam_beta1=" << c.adam_beta1 << "\n"
     << "adam_beta2=" << c.adam_beta2 << "\n"
     << "adam_eps=" << c.adam_eps << "\n"
     << "max_grad_norm=" << c.max_grad_norm << "\n"
     << "target_period=" << c.target_period << "\n"
     << "w_resample_period=" << c.w_resample_period << "\n"
     << "eps_start=" << c.eps_start << "\n"
     << "eps_end=" << c.eps_end << "\n"
     << "eps_decay_steps=" << c.eps_decay_steps << "\n"
     << "infer_epsilon=" << c.infer_epsilon << "\n"
     << "gpi_policies=" << c.gpi_policies << "\n"
     << "replay_capacity=" << c.replay_capacity << "\n"
     << "min_replay=" << c.min_replay << "\n"
     << "feature_dim=" << c.feature_dim << "\n"
     << "phi_hidden=" << detail::join_ints(c.phi_hidden) << "\n"
     << "psi_hidden=" << detail::join_ints(c.psi_hidden) << "\n"
     << "episode_cap=" << c.episode_cap << "\n"
     << "log_interval=" << c.log_interval << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Metrics stream

/// Append-only CSV; one row per logging interval, missing fields empty.
class Metrics {
 public:
  static constexpr const char* kHeader =
      "step,phase,mode,seed,intrinsic_reward_mean,extrinsic_return_mean,"
      "td_loss,vmf_loss,epsilon,success_rate";

  Metrics() { csv_ = std::string(kHeader) + "\n"; }

  static std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  void add_row(std::int64_t step, const std::string& phase, RewardMode mode,
               std::uint64_t seed, std::optional<double> intrinsic,
               std::optional<double> extrinsic, std::optional<double> td,
               std::optional<double> vmf, std::optional<double> epsilon,
               std::optional<double> success) {
    auto cell = [](std::optional<double> v) {
      return v.has_value() ? format_double(*v) : std::string();
    };
    csv_ += std::to_string(step) + "," + phase + "," + to_string(mode) + "," +
            std::to_string(seed) + "," + cell(intrinsic) + "," + cell(extrinsic) + "," +
            cell(td) + "," + cell(vmf) + "," + cell(epsilon) + "," + cell(success) + "\n";
  }

  const std::string& csv() const { return csv_; }

 private:
  std::string csv_;
};

}  // namespace aps
