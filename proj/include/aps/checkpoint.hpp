#pragma once

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "aps/config.hpp"
#include "aps/io.hpp"
#include "aps/trainer.hpp"

namespace aps {

/// Unusable checkpoint: wrong magic, wrong version, truncated payload.
/// The CLI maps this to exit code 3.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

namespace ckpt {

constexpr char kMagic[8] = {'A', 'P', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace ckpt

/// Serialize the full pipeline core: config snapshot, phase tag, counters,
/// RNG states, and all network/optimizer tensors. save -> load -> save is
/// byte identical.
inline void save_checkpoint(std::ostream& os, const PipelineCore& core,
                            const std::string& phase) {
  os.write(ckpt::kMagic, sizeof ckpt::kMagic);
  io::write_u32(os, ckpt::kVersion);
  io::write_string(os, phase);
  io::write_string(os, serialize_config(core.cfg));
  io::write_u64(os, static_cast<std::uint64_t>(core.total_env_steps));
  io::write_u64(os, static_cast<std::uint64_t>(core.updates));
  io::write_u32(os, core.episode_id);
  io::write_u32(os, core.regime_id);
  io::write_string(os, core.behavior_rng.save_state());
  io::write_string(os, core.learner_rng.save_state());
  save_net(os, core.phi);
  save_net(os, core.psi.online);
  save_net(os, core.psi.target);
  save_adam(os, core.phi_adam);
  save_adam(os, core.psi_adam);
  io::write_u32(os, static_cast<std::uint32_t>(core.w_task.size()));
  for (double x : core.w_task) io::write_f64(os, x);
  io::write_u32(os, static_cast<std::uint32_t>(core.gpi_set.size()));
  for (const auto& w : core.gpi_set) {
    io::write_u32(os, static_cast<std::uint32_t>(w.size()));
    for (double x : w) io::write_f64(os, x);
  }
}

struct LoadedCheckpoint {
  std::string phase;
  PipelineCore core;
};

inline LoadedCheckpoint load_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, ckpt::kMagic, sizeof magic) != 0)
    throw CheckpointError("bad checkpoint magic");
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!is || version != ckpt::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  try {
    LoadedCheckpoint out;
    out.phase = io::read_string(is);
    out.core.cfg = parse_config(io::read_string(is));
    out.core.total_env_steps = static_cast<std::int64_t>(io::read_u64(is));
    out.core.updates = static_cast<std::int64_t>(io::read_u64(is));
    out.core.episode_id = io::read_u32(is);
    out.core.regime_id = io::read_u32(is);
    out.core.behavior_rng.load_state(io::read_string(is));
    out.core.learner_rng.load_state(io::read_string(is));
    out.core.phi = load_net(is);
    out.core.psi.online = load_net(is);
    out.core.psi.target = load_net(is);
    out.core.psi.d = out.core.cfg.feature_dim;
    out.core.psi.n_actions = out.core.psi.online.output_dim() / out.core.psi.d;
    out.core.phi_adam = load_adam(is, out.core.phi);
    out.core.psi_adam = load_adam(is, out.core.psi.online);
    const auto wn = io::read_u32(is);
    out.core.w_task.resize(wn);
    for (auto& x : out.core.w_task) x = io::read_f64(is);
    const auto gn = io::read_u32(is);
    out.core.gpi_set.resize(gn);
    for (auto& w : out.core.gpi_set) {
      const auto n = io::read_u32(is);
      w.resize(n);
      for (auto& x : w) x = io::read_f64(is);
    }
    return out;
  } catch (const SerializationError& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

inline void save_checkpoint_file(const std::string& path, const PipelineCore& core,
                                 const std::string& phase) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  save_checkpoint(f, core, phase);
  if (!f) throw std::runtime_error("short write on checkpoint: " + path);
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  return load_checkpoint(f);
}

}  // namespace aps
