#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aps/checkpoint.hpp"
#include "aps/cli.hpp"
#include "aps/trainer.hpp"

using namespace aps;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("aps_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// fast settings for end-to-end command tests
const std::vector<std::string> kFastSets = {
    "--set", "pretrain_steps=400",  "--set", "min_replay=200",
    "--set", "finetune_steps=300",  "--set", "eval_episodes=4",
    "--set", "infer_episodes=2",    "--set", "infer_step_cap=250",
    "--set", "phi_hidden=12,12",    "--set", "psi_hidden=12",
    "--set", "log_interval=200",    "--set", "k=5",
};

std::vector<std::string> with_fast(std::vector<std::string> args) {
  args.insert(args.end(), kFastSets.begin(), kFastSets.end());
  return args;
}

RunConfig fast_config() {
  RunConfig cfg = parse_config(cli::resolve_config_text("easy_aps"));
  cfg.seed = 1;
  cfg.pretrain_steps = 400;
  cfg.min_replay = 200;
  cfg.finetune_steps = 300;
  cfg.eval_episodes = 4;
  cfg.infer_episodes = 2;
  cfg.infer_step_cap = 250;
  cfg.phi_hidden = {12, 12};
  cfg.psi_hidden = {12};
  cfg.log_interval = 200;
  cfg.k = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config: serialize/parse round trip preserves every field") {
  RunConfig cfg;
  cfg.mode = RewardMode::kVisr;
  cfg.map = "hard";
  cfg.seed = 123;
  cfg.pretrain_steps = 4567;
  cfg.gamma = 0.97;
  cfg.phi_hidden = {20, 24};
  cfg.lr_finetune = 0.00123;
  const RunConfig back = parse_config(serialize_config(cfg));
  CHECK(serialize_config(back) == serialize_config(cfg));
  CHECK(back.mode == RewardMode::kVisr);
  CHECK(back.phi_hidden == std::vector<int>{20, 24});
}

TEST_CASE("config: unknown keys and bad values are reported by name") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(config_set(cfg, "bogus_key", "1"),
                       doctest::Contains("bogus_key"), ConfigError);
  CHECK_THROWS_WITH_AS(config_set(cfg, "gamma", "fast"),
                       doctest::Contains("gamma"), ConfigError);
  CHECK_THROWS_AS(config_set(cfg, "mode", "extrinsic"), ConfigError);
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config: bundled preset files match the built-in presets") {
  for (const std::string level : {"easy", "hard"}) {
    for (const std::string mode : {"aps", "apt", "visr"}) {
      const std::string name = level + "_" + mode;
      const std::string bundled = slurp(fs::path(APS_CONFIGS_DIR) / (name + ".cfg"));
      CHECK(bundled == cli::builtin_preset(name));
      const RunConfig cfg = parse_config(cli::resolve_config_text(name));
      CHECK(to_string(cfg.mode) == mode);
      CHECK(cfg.map == level);
    }
  }
  CHECK_THROWS_AS((void)cli::resolve_config_text("no_such_preset"), ConfigError);
}

TEST_CASE("cli: pretrain writes checkpoint, metrics and resolved config") {
  TempDir tmp;
  const int rc = cli::run(with_fast(
      {"pretrain", "--config", "easy_aps", "--seed", "1", "--out", tmp.sub("run")}));
  CHECK(rc == 0);
  CHECK(fs::exists(tmp.path / "run" / "ckpt_pretrain.bin"));
  CHECK(fs::exists(tmp.path / "run" / "metrics.csv"));
  CHECK(fs::exists(tmp.path / "run" / "config_resolved.cfg"));
  const std::string csv = slurp(tmp.path / "run" / "metrics.csv");
  CHECK(csv.rfind("step,phase,mode,seed,", 0) == 0);
  CHECK(csv.find(",pretrain,aps,1,") != std::string::npos);
}

TEST_CASE("cli: unknown mode and unknown config key exit with code 2") {
  TempDir tmp;
  CHECK(cli::run({"pretrain", "--mode", "bogus", "--out", tmp.sub("x")}) == 2);
  CHECK(cli::run({"pretrain", "--set", "not_a_key=3", "--out", tmp.sub("y")}) == 2);
  CHECK(cli::run({"plot", tmp.sub("empty_dir")}) == 2);
  CHECK(cli::run({"definitely-not-a-subcommand"}) == 2);
}

TEST_CASE("cli: identical config and seed give byte-identical metrics files") {
  TempDir tmp;
  REQUIRE(cli::run(with_fast({"pretrain", "--config", "easy_aps", "--seed", "3", "--out",
                              tmp.sub("a")})) == 0);
  REQUIRE(cli::run(with_fast({"pretrain", "--config", "easy_aps", "--seed", "3", "--out",
                              tmp.sub("b")})) == 0);
  CHECK(slurp(tmp.path / "a" / "metrics.csv") == slurp(tmp.path / "b" / "metrics.csv"));
  CHECK(slurp(tmp.path / "a" / "ckpt_pretrain.bin") ==
        slurp(tmp.path / "b" / "ckpt_pretrain.bin"));
}

TEST_CASE("cli: finetune from a checkpoint, evaluation rows present; eval works") {
  TempDir tmp;
  REQUIRE(cli::run(with_fast({"pretrain", "--config", "easy_aps", "--seed", "1", "--out",
                              tmp.sub("run")})) == 0);
  const int rc = cli::run({"finetune", tmp.sub("run") + "/ckpt_pretrain.bin", "--out",
                           tmp.sub("run")});
  CHECK(rc == 0);
  const std::string csv = slurp(tmp.path / "run" / "metrics_finetune.csv");
  CHECK(csv.find(",zero_shot,") != std::string::npos);
  CHECK(csv.find(",finetuned,") != std::string::npos);
  CHECK(fs::exists(tmp.path / "run" / "ckpt_finetune.bin"));

  CHECK(cli::run({"eval", tmp.sub("run") + "/ckpt_finetune.bin", "--out",
                  tmp.sub("eval_out")}) == 0);
  CHECK(fs::exists(tmp.path / "eval_out" / "eval.csv"));
}

TEST_CASE("cli: corrupt checkpoint magic and version mismatches exit with code 3") {
  TempDir tmp;
  {
    std::ofstream f(tmp.sub("bad.bin"), std::ios::binary);
    f << "THIS IS NOT A CHECKPOINT";
  }
  CHECK(cli::run({"finetune", tmp.sub("bad.bin"), "--out", tmp.sub("o")}) == 3);
  CHECK(cli::run({"eval", tmp.sub("bad.bin")}) == 3);
  // a finetune checkpoint is not a valid input for `finetune`
  REQUIRE(cli::run(with_fast({"pretrain", "--config", "easy_aps", "--seed", "1", "--out",
                              tmp.sub("r")})) == 0);
  REQUIRE(cli::run({"finetune", tmp.sub("r") + "/ckpt_pretrain.bin", "--out",
                    tmp.sub("r")}) == 0);
  CHECK(cli::run({"finetune", tmp.sub("r") + "/ckpt_finetune.bin", "--out",
                  tmp.sub("r2")}) == 3);
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
  RunConfig cfg = fast_config();
  Pipeline p(cfg);
  Metrics m;
  p.run_pretrain(m);
  std::stringstream s1;
  save_checkpoint(s1, p.core(), "pretrain");
  LoadedCheckpoint loaded = load_checkpoint(s1);
  CHECK(loaded.phase == "pretrain");
  std::stringstream s2;
  save_checkpoint(s2, loaded.core, "pretrain");
  std::stringstream s3;
  save_checkpoint(s3, p.core(), "pretrain");
  CHECK(s2.str() == s3.str());
}

TEST_CASE("resume equivalence: finetune from checkpoint equals the uninterrupted run") {
  RunConfig cfg = fast_config();

  // uninterrupted
  Pipeline direct(cfg);
  Metrics direct_pre, direct_fin;
  direct.run_pretrain(direct_pre);
  direct.run_finetune_pipeline(direct_fin);

  // interrupted at the pretrain/finetune boundary
  Pipeline first(cfg);
  Metrics first_pre;
  first.run_pretrain(first_pre);
  std::stringstream ss;
  save_checkpoint(ss, first.core(), "pretrain");
  Pipeline resumed(load_checkpoint(ss).core);
  Metrics resumed_fin;
  resumed.run_finetune_pipeline(resumed_fin);

  CHECK(direct_pre.csv() == first_pre.csv());
  CHECK(direct_fin.csv() == resumed_fin.csv());
}

TEST_CASE("plot: aggregates runs; means match a recompute oracle to 1e-9") {
  TempDir tmp;
  // synthesize three completed easy runs and one hard run
  auto write_run = [&](const std::string& dir, const std::string& mode,
                       const std::string& map, int seed, double zs, double ft) {
    fs::create_directories(tmp.path / dir);
    RunConfig cfg;
    config_set(cfg, "mode", mode);
    cfg.map = map;
    cfg.seed = static_cast<std::uint64_t>(seed);
    std::ofstream c(tmp.path / dir / "config_resolved.cfg");
    c << serialize_config(cfg);
    Metrics m;
    m.add_row(0, "zero_shot", cfg.mode, cfg.seed, std::nullopt, 0.0, std::nullopt,
              std::nullopt, std::nullopt, zs);
    m.add_row(100, "finetuned", cfg.mode, cfg.seed, std::nullopt, 0.0, std::nullopt,
              std::nullopt, std::nullopt, ft);
    std::ofstream f(tmp.path / dir / "metrics_finetune.csv");
    f << m.csv();
  };
  write_run("r1", "aps", "easy", 1, 0.25, 0.75);
  write_run("r2", "aps", "easy", 2, 0.50, 1.00);
  write_run("r3", "aps", "easy", 3, 0.00, 0.50);
  write_run("r4", "visr", "hard", 1, 0.10, 0.20);

  const int rc = cli::run({"plot", tmp.sub("r1"), tmp.sub("r2"), tmp.sub("r3"),
                           tmp.sub("r4"), "--out", tmp.sub("plots")});
  CHECK(rc == 0);
  const std::string table = slurp(tmp.path / "plots" / "plot_data.txt");

  // spreadsheet-style oracle for the aps/easy row
  const double zs_mean = (0.25 + 0.50 + 0.00) / 3.0;
  const double ft_mean = (0.75 + 1.00 + 0.50) / 3.0;
  auto sd = [](std::initializer_list<double> xs, double mu) {
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return std::sqrt(s / (xs.size() - 1));
  };
  const double zs_sd = sd({0.25, 0.50, 0.00}, zs_mean);
  const double ft_sd = sd({0.75, 1.00, 0.50}, ft_mean);

  std::istringstream is(table);
  std::string line;
  std::getline(is, line);  // header
  bool found_aps = false, found_visr = false;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
      if (ch == '\t') {
        cells.push_back(cur);
        cur.clear();
      } else cur += ch;
    }
    cells.push_back(cur);
    REQUIRE(cells.size() == 7);
    if (cells[0] == "aps") {
      found_aps = true;
      CHECK(cells[1] == "easy");
      CHECK(cells[2] == "3");
      CHECK(std::abs(std::strtod(cells[3].c_str(), nullptr) - zs_mean) < 1e-9);
      CHECK(std::abs(std::strtod(cells[4].c_str(), nullptr) - zs_sd) < 1e-9);
      CHECK(std::abs(std::strtod(cells[5].c_str(), nullptr) - ft_mean) < 1e-9);
      CHECK(std::abs(std::strtod(cells[6].c_str(), nullptr) - ft_sd) < 1e-9);
    } else if (cells[0] == "visr") {
      found_visr = true;
      CHECK(cells[2] == "1");
      // single seed: sd reported as 0
      CHECK(std::strtod(cells[4].c_str(), nullptr) == 0.0);
      CHECK(std::strtod(cells[6].c_str(), nullptr) == 0.0);
    }
  }
  CHECK(found_aps);
  CHECK(found_visr);
}
