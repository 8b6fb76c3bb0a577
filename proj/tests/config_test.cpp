#include "pirl/config.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pirl/harness.hpp"

namespace pirl {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    dir_ = fs::temp_directory_path() /
           ("pirl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~TempDir() { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string dir() const { return dir_.string(); }

 private:
  static inline int counter_ = 0;
  fs::path dir_;
};

std::string write_file(const TempDir& tmp, const std::string& name,
                       const std::string& text) {
  const std::string path = tmp.path(name);
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(KeyValueConfig, ParsesAssignmentsAndComments) {
  const auto kv = KeyValueConfig::parse_string(
      "# comment\n"
      "train.lambda = 0.01  # trailing comment\n"
      "system = benchmark\n"
      "\n"
      "seeds = 0, 1, 2\n");
  EXPECT_DOUBLE_EQ(kv.get_double("train.lambda", -1.0), 0.01);
  EXPECT_EQ(kv.get_string("system", ""), "benchmark");
  EXPECT_EQ(kv.get_u64_list("seeds", {}), (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_FALSE(kv.has("train.mu"));
}

TEST(KeyValueConfig, ErrorsCarryLineNumbers) {
  try {
    KeyValueConfig::parse_string("train.tau = 2.0\nnot an assignment\n", "test.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos);
  }

  const auto kv = KeyValueConfig::parse_string("train.tau = abc\n", "test.cfg");
  try {
    kv.get_double("train.tau", 0.0);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:1"), std::string::npos);
  }
}

TEST(ExperimentConfig, DefaultsAndOverrides) {
  const auto cfg = ExperimentConfig::from_kv(KeyValueConfig::parse_string(
      "system = benchmark\n"
      "train.lambda = 0.003\n"
      "train.tau_d = 1.0\n"
      "train.reward = shaped\n"
      "train.hidden = 16,16\n"
      "eval.probes = 0 0; 1 0; -1 0\n"
      "seeds = 4,5\n"
      "out = runs/demo\n"));
  EXPECT_DOUBLE_EQ(cfg.train.lambda, 0.003);
  EXPECT_DOUBLE_EQ(cfg.train.tau_d, 1.0);
  EXPECT_DOUBLE_EQ(cfg.train.tau, 2.0);  // default retained
  EXPECT_EQ(cfg.train.reward_mode, RewardMode::shaped);
  EXPECT_EQ(cfg.train.hidden_layers, (std::vector<int>{16, 16}));
  ASSERT_EQ(cfg.eval.probes.size(), 3u);
  EXPECT_EQ(cfg.eval.probes[2][0], -1.0);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(cfg.out_dir, "runs/demo");
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(
      ExperimentConfig::from_kv(KeyValueConfig::parse_string("train.lamda = 0.01\n")),
      ConfigError);
  EXPECT_THROW(
      ExperimentConfig::from_kv(KeyValueConfig::parse_string("system = unknown\n")),
      ConfigError);
  EXPECT_THROW(
      ExperimentConfig::from_kv(KeyValueConfig::parse_string("train.optimizer = rmsprop\n")),
      ConfigError);
  // invariant violations surface through TrainConfig::validate
  EXPECT_THROW(
      ExperimentConfig::from_kv(KeyValueConfig::parse_string("train.tau_d = 5.0\n")),
      std::invalid_argument);
}

TEST(ExperimentConfig, HashTracksTrainingFields) {
  auto base = ExperimentConfig::from_kv(KeyValueConfig::parse_string(""));
  auto tweaked = base;
  EXPECT_EQ(base.config_hash(), tweaked.config_hash());
  tweaked.train.lambda = 0.5;
  EXPECT_NE(base.config_hash(), tweaked.config_hash());
  // evaluation settings do not bind the checkpoint
  auto eval_changed = base;
  eval_changed.eval.n_paths = 99;
  EXPECT_EQ(base.config_hash(), eval_changed.config_hash());
}

const char* kTinyConfig =
    "system = benchmark\n"
    "seeds = 1\n"
    "train.episodes = 3\n"
    "train.tau = 1.0\n"
    "train.tau_d = 1.0\n"
    "train.hidden = 6\n"
    "train.batch_data = 4\n"
    "train.batch_pde = 4\n"
    "train.batch_boundary = 4\n"
    "train.checkpoint_every = 2\n"
    "eval.grid = 3\n"
    "eval.n_paths = 30\n"
    "eval.tau = 1.0\n";

TEST(RunTrain, WritesMetricsCheckpointAndSummary) {
  TempDir tmp;
  const std::string config = write_file(tmp, "tiny.cfg", kTinyConfig);
  std::ostringstream log;
  ASSERT_EQ(run_train(config, std::nullopt, tmp.path("out"), log), kOk) << log.str();

  EXPECT_TRUE(fs::exists(tmp.path("out/metrics_seed1.csv")));
  EXPECT_TRUE(fs::exists(tmp.path("out/checkpoint_seed1.net")));
  EXPECT_TRUE(fs::exists(tmp.path("out/checkpoint_seed1_ep2.net")));
  EXPECT_TRUE(fs::exists(tmp.path("out/summary_seed1.json")));

  const std::string csv = slurp(tmp.path("out/metrics_seed1.csv"));
  EXPECT_NE(csv.find("# config_hash=0x"), std::string::npos);
  EXPECT_NE(csv.find("episode,steps,return,epsilon,loss_total,loss_data,loss_pde,"
                     "loss_boundary,cum_unsafe_events,wall_ms"),
            std::string::npos);
  // header comment + column row + 3 episodes
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(RunTrain, MetricsDeterministicUpToWallClock) {
  TempDir tmp;
  const std::string config = write_file(tmp, "tiny.cfg", kTinyConfig);
  std::ostringstream log;
  ASSERT_EQ(run_train(config, std::nullopt, tmp.path("a"), log), kOk);
  ASSERT_EQ(run_train(config, std::nullopt, tmp.path("b"), log), kOk);

  std::istringstream a(slurp(tmp.path("a/metrics_seed1.csv")));
  std::istringstream b(slurp(tmp.path("b/metrics_seed1.csv")));
  std::string line_a, line_b;
  while (std::getline(a, line_a) && std::getline(b, line_b)) {
    const auto cut = [](const std::string& s) {
      return s.substr(0, s.rfind(','));  // strip the wall_ms column
    };
    EXPECT_EQ(cut(line_a), cut(line_b));
  }

  // checkpoints are bit-identical
  EXPECT_EQ(slurp(tmp.path("a/checkpoint_seed1.net")),
            slurp(tmp.path("b/checkpoint_seed1.net")));
}

TEST(RunTrain, ErrorTaxonomy) {
  TempDir tmp;
  std::ostringstream log;
  EXPECT_EQ(run_train(tmp.path("absent.cfg"), std::nullopt, std::nullopt, log),
            kMissingFile);
  const std::string bad = write_file(tmp, "bad.cfg", "train.episodes\n");
  EXPECT_EQ(run_train(bad, std::nullopt, std::nullopt, log), kConfigError);
}

TEST(RunEval, ProducesReportAndIsDeterministic) {
  TempDir tmp;
  const std::string config = write_file(tmp, "tiny.cfg", kTinyConfig);
  std::ostringstream log;
  ASSERT_EQ(run_train(config, std::nullopt, tmp.path("out"), log), kOk);

  ASSERT_EQ(run_eval(tmp.path("out/checkpoint_seed1.net"), config, std::nullopt,
                     tmp.path("eval_a"), log),
            kOk)
      << log.str();
  ASSERT_EQ(run_eval(tmp.path("out/checkpoint_seed1.net"), config, std::nullopt,
                     tmp.path("eval_b"), log),
            kOk);

  const std::string csv = slurp(tmp.path("eval_a/eval_seed1.csv"));
  EXPECT_NE(csv.find("x1,x2,prediction,mc_mean,mc_se"), std::string::npos);
  // 3x3 grid: comment + header + 9 rows
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_EQ(csv, slurp(tmp.path("eval_b/eval_seed1.csv")));
  EXPECT_EQ(slurp(tmp.path("eval_a/eval_summary.json")),
            slurp(tmp.path("eval_b/eval_summary.json")));

  // directory mode aggregates the per-seed checkpoints
  ASSERT_EQ(run_eval(tmp.path("out"), config, std::nullopt, tmp.path("eval_dir"), log),
            kOk);
  EXPECT_TRUE(fs::exists(tmp.path("eval_dir/eval_seed1.csv")));
}

TEST(RunEval, RejectsHashMismatchAndCorruptCheckpoints) {
  TempDir tmp;
  const std::string config = write_file(tmp, "tiny.cfg", kTinyConfig);
  std::ostringstream log;
  ASSERT_EQ(run_train(config, std::nullopt, tmp.path("out"), log), kOk);

  // a different training section must be rejected
  const std::string other =
      write_file(tmp, "other.cfg", std::string(kTinyConfig) + "train.lambda = 0.5\n");
  EXPECT_EQ(run_eval(tmp.path("out/checkpoint_seed1.net"), other, std::nullopt,
                     tmp.path("eval"), log),
            kCheckpointMismatch);

  const std::string junk = write_file(tmp, "junk.net", "not a checkpoint at all");
  EXPECT_EQ(run_eval(junk, config, std::nullopt, tmp.path("eval"), log),
            kCheckpointMismatch);

  EXPECT_EQ(run_eval(tmp.path("none.net"), config, std::nullopt, tmp.path("eval"), log),
            kMissingFile);
  EXPECT_EQ(run_eval(tmp.path("out/checkpoint_seed1.net"), tmp.path("none.cfg"),
                     std::nullopt, tmp.path("eval"), log),
            kMissingFile);
}

TEST(RunOracleCheck, PassesAtModeratePathCountDeterministically) {
  OracleCheckOptions opt;
  opt.n_paths = 10000;
  opt.dt = 2e-3;
  opt.seed = 3;
  std::ostringstream out;
  EXPECT_EQ(run_oracle_check(opt, out), 0) << out.str();
  EXPECT_NE(out.str().find("PASS"), std::string::npos);
}

TEST(RunOracleCheck, InjectedBiasFails) {
  OracleCheckOptions opt;
  opt.n_paths = 10000;
  opt.dt = 2e-3;
  opt.seed = 3;
  opt.mc_bias = 0.1;
  std::ostringstream out;
  EXPECT_NE(run_oracle_check(opt, out), 0);
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
}

TEST(RunOracleCheck, TinyPathCountIsInconclusiveNotFailing) {
  OracleCheckOptions opt;
  opt.n_paths = 10;
  opt.dt = 1e-2;
  opt.seed = 3;
  std::ostringstream out;
  EXPECT_EQ(run_oracle_check(opt, out), 0);
  EXPECT_NE(out.str().find("INCONCLUSIVE"), std::string::npos);
}

TEST(Recipes, ListedFilesExistAndParse) {
  std::ostringstream out;
  list_recipes(out);
  EXPECT_NE(out.str().find("fig3_pirl"), std::string::npos);
  EXPECT_NE(out.str().find("fig3_dqn"), std::string::npos);
  EXPECT_NE(out.str().find("fig4_tauD10_pde"), std::string::npos);

  for (const Recipe& recipe : recipes()) {
    const fs::path path = fs::path(PIRL_SOURCE_DIR) / recipe.file;
    ASSERT_TRUE(fs::exists(path)) << recipe.file;
    EXPECT_NO_THROW(ExperimentConfig::from_file(path.string())) << recipe.file;
  }
}

TEST(Recipes, NamedRecipesPinTheirHyperparameters) {
  const auto load = [](const char* file) {
    return ExperimentConfig::from_file((fs::path(PIRL_SOURCE_DIR) / file).string());
  };
  const auto pirl = load("recipes/fig3_pirl.cfg");
  EXPECT_DOUBLE_EQ(pirl.train.lambda, 1e-2);
  EXPECT_DOUBLE_EQ(pirl.train.mu, 1.0);
  EXPECT_EQ(pirl.seeds.size(), 8u);

  const auto dqn = load("recipes/fig3_dqn.cfg");
  EXPECT_DOUBLE_EQ(dqn.train.lambda, 0.0);
  EXPECT_DOUBLE_EQ(dqn.train.mu, 0.0);

  const auto t10 = load("recipes/fig4_tauD10_pde.cfg");
  EXPECT_DOUBLE_EQ(t10.train.tau_d, 1.0);
  EXPECT_DOUBLE_EQ(t10.train.lambda, 3e-3);
  EXPECT_DOUBLE_EQ(t10.eval.tau, 2.0);

  const auto t15 = load("recipes/fig4_tauD15_pde.cfg");
  EXPECT_DOUBLE_EQ(t15.train.tau_d, 1.5);
  EXPECT_DOUBLE_EQ(t15.train.lambda, 5e-3);

  const auto shaping = load("recipes/fig2_shaping.cfg");
  EXPECT_EQ(shaping.train.reward_mode, RewardMode::shaped);
  EXPECT_DOUBLE_EQ(shaping.train.shaping_coeff, 0.05);
}

}  // namespace
}  // namespace pirl
