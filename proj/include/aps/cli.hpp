#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aps/checkpoint.hpp"
#include "aps/config.hpp"
#include "aps/trainer.hpp"

namespace aps::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config resolution

// Experiment presets: the calibrated desk-scale settings behind the
// success-rate comparison. k comes from the searched {3, 5, 10} grid; the
// particle space of a random (apt) encoder wants the sharper k.
inline std::string builtin_preset(const std::string& name) {
  static const std::map<std::string, std::string> presets = [] {
    std::map<std::string, std::string> m;
    for (const std::string level : {"easy", "hard"})
      for (const std::string mode : {"aps", "apt", "visr"})
        m[level + "_" + mode] =
            "# " + level + " level, " + mode + " pretraining\n" +
            "mode=" + mode + "\n" +
            "map=" + level + "\n" +
            "k=" + (mode == "apt" ? std::string("3") : std::string("10")) + "\n" +
            "gpi_policies=0\n"
            "episode_cap=400\n"
            "finetune_steps=120000\n";
    return m;
  }();
  const auto it = presets.find(name);
  return it == presets.end() ? std::string() : it->second;
}

/// --config accepts a file path or the name of a bundled preset
/// (easy_aps, easy_apt, easy_visr, hard_aps, hard_apt, hard_visr).
inline std::string resolve_config_text(const std::string& name_or_path) {
  auto read_file = [](const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  if (fs::exists(name_or_path) && fs::is_regular_file(name_or_path))
    return read_file(name_or_path);
  if (const std::string preset = builtin_preset(name_or_path); !preset.empty())
    return preset;
#ifdef APS_CONFIGS_DIR
  const fs::path bundled = fs::path(APS_CONFIGS_DIR) / (name_or_path + ".cfg");
  if (fs::exists(bundled)) return read_file(bundled);
#endif
  throw ConfigError("config '" + name_or_path + "' is neither a file nor a known preset");
}

struct CommonOpts {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> map;
  std::optional<std::int64_t> steps;
  std::vector<std::string> sets;  // raw key=value overrides
};

inline RunConfig build_config(const CommonOpts& o, std::int64_t RunConfig::*steps_field) {
  RunConfig cfg;
  if (!o.config.empty()) cfg = parse_config(resolve_config_text(o.config));
  if (o.mode) config_set(cfg, "mode", *o.mode);
  if (o.map) config_set(cfg, "map", *o.map);
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.*steps_field = *o.steps;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config_set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

inline fs::path resolve_out_dir(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("APS_OUT_DIR"); env && *env) return env;
  return ".";
}

inline void write_text_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? "." : p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// ---------------------------------------------------------------------------
// Metrics CSV reading (for plot aggregation)

struct EvalRow {
  std::string phase;
  std::string mode;
  std::uint64_t seed = 0;
  double success_rate = 0.0;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

/// Pull the zero_shot / finetuned evaluation rows out of a metrics CSV.
inline std::vector<EvalRow> read_eval_rows(const fs::path& csv_path) {
  std::ifstream f(csv_path);
  if (!f) return {};
  std::vector<EvalRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (first) {
      first = false;
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 10) continue;
    if (cells[1] != "zero_shot" && cells[1] != "finetuned") continue;
    EvalRow r;
    r.phase = cells[1];
    r.mode = cells[2];
    r.seed = std::strtoull(cells[3].c_str(), nullptr, 10);
    r.success_rate = std::strtod(cells[9].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct PlotRow {
  std::string mode;
  std::string level;
  int seeds = 0;
  double zero_mean = 0.0, zero_sd = 0.0;
  double fine_mean = 0.0, fine_sd = 0.0;
};

struct RunEval {
  std::string mode;
  std::string level;
  std::uint64_t seed = 0;
  double zero_shot = 0.0;
  double finetuned = 0.0;
};

inline std::string level_from_map(const std::string& map) {
  if (map == "easy" || map == "hard") return map;
  return fs::path(map).stem().string();
}

/// Read one run directory (config_resolved.cfg + metrics_finetune.csv).
inline std::optional<RunEval> read_run_dir(const fs::path& dir) {
  const fs::path cfg_path = dir / "config_resolved.cfg";
  const fs::path metrics_path = dir / "metrics_finetune.csv";
  if (!fs::exists(cfg_path) || !fs::exists(metrics_path)) return std::nullopt;
  std::ifstream cf(cfg_path);
  std::ostringstream ss;
  ss << cf.rdbuf();
  const RunConfig cfg = parse_config(ss.str());
  RunEval out;
  out.mode = to_string(cfg.mode);
  out.level = level_from_map(cfg.map);
  out.seed = cfg.seed;
  bool have_zero = false, have_fine = false;
  for (const auto& row : read_eval_rows(metrics_path)) {
    if (row.phase == "zero_shot") {
      out.zero_shot = row.success_rate;
      have_zero = true;
    } else {
      out.finetuned = row.success_rate;
      have_fine = true;
    }
  }
  if (!have_zero || !have_fine) return std::nullopt;
  return out;
}

inline std::vector<PlotRow> aggregate_runs(const std::vector<RunEval>& runs) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunEval*>> groups;
  for (const auto& r : runs) groups[{r.level, r.mode}].push_back(&r);
  std::vector<PlotRow> rows;
  for (const auto& [key, members] : groups) {
    PlotRow row;
    row.level = key.first;
    row.mode = key.second;
    row.seeds = static_cast<int>(members.size());
    Vec zs, ft;
    for (const auto* m : members) {
      zs.push_back(m->zero_shot);
      ft.push_back(m->finetuned);
    }
    row.zero_mean = mean(zs);
    row.zero_sd = sample_stddev(zs);
    row.fine_mean = mean(ft);
    row.fine_sd = sample_stddev(ft);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Plain-text success-rate table, one row per (mode, level).
inline std::string render_plot_table(const std::vector<PlotRow>& rows) {
  std::string out =
      "mode\tlevel\tseeds\tzero_shot_mean\tzero_shot_sd\tfinetuned_mean\tfinetuned_sd\n";
  for (const auto& r : rows) {
    out += r.mode + "\t" + r.level + "\t" + std::to_string(r.seeds) + "\t" +
           Metrics::format_double(r.zero_mean) + "\t" + Metrics::format_double(r.zero_sd) +
           "\t" + Metrics::format_double(r.fine_mean) + "\t" +
           Metrics::format_double(r.fine_sd) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_pretrain(const CommonOpts& opts) {
  const RunConfig cfg = build_config(opts, &RunConfig::pretrain_steps);
  const fs::path out = resolve_out_dir(opts.out_dir);
  fs::create_directories(out);

  Pipeline pipeline(cfg);
  Metrics metrics;
  pipeline.run_pretrain(metrics);

  write_text_file(out / "config_resolved.cfg", serialize_config(cfg));
  write_text_file(out / "metrics.csv", metrics.csv());
  {
    std::ofstream f(out / "ckpt_pretrain.bin", std::ios::binary | std::ios::trunc);
    save_checkpoint(f, pipeline.core(), "pretrain");
  }
  std::cout << "pretrain done: " << cfg.pretrain_steps << " steps, mode "
            << to_string(cfg.mode) << ", seed " << cfg.seed << "\n"
            << "wrote " << (out / "ckpt_pretrain.bin").string() << " and "
            << (out / "metrics.csv").string() << "\n";
  return 0;
}

inline int cmd_finetune(const std::string& ckpt_path, const CommonOpts& opts) {
  LoadedCheckpoint loaded = load_checkpoint_file(ckpt_path);
  if (loaded.phase != "pretrain")
    throw CheckpointError("finetune expects a pretraining checkpoint, got phase '" +
                          loaded.phase + "'");
  if (opts.steps) loaded.core.cfg.finetune_steps = *opts.steps;
  for (const auto& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config_set(loaded.core.cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  loaded.core.cfg.validate();
  const fs::path out = resolve_out_dir(opts.out_dir);
  fs::create_directories(out);

  Pipeline pipeline(std::move(loaded.core));
  Metrics metrics;
  const auto outcome = pipeline.run_finetune_pipeline(metrics);
  if (outcome.inference_degenerate)
    std::cerr << "warning: task inference was degenerate (no reward observed); "
                 "fine-tuned a random task vector\n";

  write_text_file(out / "config_resolved.cfg", serialize_config(pipeline.config()));
  write_text_file(out / "metrics_finetune.csv", metrics.csv());
  {
    std::ofstream f(out / "ckpt_finetune.bin", std::ios::binary | std::ios::trunc);
    save_checkpoint(f, pipeline.core(), "finetune");
  }
  std::cout << "zero_shot success_rate=" << Metrics::format_double(outcome.zero_shot.success_rate)
            << " mean_return=" << Metrics::format_double(outcome.zero_shot.mean_return) << "\n"
            << "finetuned success_rate=" << Metrics::format_double(outcome.finetuned.success_rate)
            << " mean_return=" << Metrics::format_double(outcome.finetuned.mean_return) << "\n";
  return 0;
}

inline int cmd_eval(const std::string& ckpt_path, const CommonOpts& opts) {
  LoadedCheckpoint loaded = load_checkpoint_file(ckpt_path);
  for (const auto& kv : opts.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config_set(loaded.core.cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  loaded.core.cfg.validate();
  const bool finetuned = loaded.phase == "finetune";
  Pipeline pipeline(std::move(loaded.core));
  if (!finetuned) {
    // zero-shot path: infer the task vector first, then greedy GPI
    Metrics scratch;
    TaskVector w;
    try {
      w = pipeline.infer_task();
    } catch (const DegenerateTaskError& e) {
      std::cerr << "warning: " << e.what() << "; evaluating a random task vector\n";
      w = sample_task_vector(pipeline.core().behavior_rng, pipeline.config().feature_dim);
    }
    pipeline.setup_finetune(std::move(w));
  }
  const EvalStats stats = pipeline.evaluate();
  std::cout << "success_rate=" << Metrics::format_double(stats.success_rate)
            << " mean_return=" << Metrics::format_double(stats.mean_return) << "\n";
  if (!opts.out_dir.empty()) {
    Metrics m;
    m.add_row(0, finetuned ? "finetuned" : "zero_shot", pipeline.config().mode,
              pipeline.config().seed, std::nullopt, stats.mean_return, std::nullopt,
              std::nullopt, std::nullopt, stats.success_rate);
    const fs::path out = resolve_out_dir(opts.out_dir);
    fs::create_directories(out);
    write_text_file(out / "eval.csv", m.csv());
  }
  return 0;
}

inline int cmd_plot(const std::vector<std::string>& dirs, const std::string& out_flag) {
  std::vector<RunEval> runs;
  for (const auto& d : dirs)
    if (auto run = read_run_dir(d)) runs.push_back(std::move(*run));
  if (runs.empty())
    throw ConfigError("plot: no completed runs found in the given directories");
  const std::string table = render_plot_table(aggregate_runs(runs));
  std::cout << table;
  const fs::path out = resolve_out_dir(out_flag);
  fs::create_directories(out);
  write_text_file(out / "plot_data.txt", table);
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(std::vector<std::string> args) {
  CLI::App app{"APS gridworld pretraining harness"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string ckpt_path;
  std::vector<std::string> plot_dirs;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) {
      cmd->add_option("--config", opts.config, "config file path or preset name");
      cmd->add_option("--seed", opts.seed, "random seed");
      cmd->add_option("--mode", opts.mode, "reward mode: aps|apt|visr");
      cmd->add_option("--map", opts.map, "easy|hard|<map file>");
    }
    cmd->add_option("--steps", opts.steps, "step budget for this command's phase");
    cmd->add_option("--set", opts.sets, "extra key=value config overrides")
        ->take_all();
    cmd->add_option("--out", opts.out_dir,
                    "output directory (default $APS_OUT_DIR or '.')");
  };

  CLI::App* pre = app.add_subcommand("pretrain", "reward-free pretraining run");
  add_common(pre, true);

  CLI::App* fin = app.add_subcommand(
      "finetune", "task inference + fine-tuning + evaluation from a checkpoint");
  fin->add_option("checkpoint", ckpt_path, "pretraining checkpoint")->required();
  add_common(fin, false);

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint (greedy GPI)");
  ev->add_option("checkpoint", ckpt_path, "checkpoint to evaluate")->required();
  add_common(ev, false);

  CLI::App* plot = app.add_subcommand("plot", "aggregate run metrics into a plot table");
  plot->add_option("dirs", plot_dirs, "run output directories")->required();
  plot->add_option("--out", opts.out_dir, "output directory");

  try {
    std::reverse(args.begin(), args.end());  // CLI11 parses reversed vectors
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(opts);
    if (fin->parsed()) return cmd_finetune(ckpt_path, opts);
    if (ev->parsed()) return cmd_eval(ckpt_path, opts);
    if (plot->parsed()) return cmd_plot(plot_dirs, opts.out_dir);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MapError& e) {
    std::cerr << "map error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aps::cli
