#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pirl/harness.hpp"

namespace {

std::optional<std::uint64_t> resolve_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() > 0) return value;
  // The only environment override: SEED.
  if (const char* env = std::getenv("SEED")) {
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed DQN for long-horizon safety probabilities"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  long oracle_paths = 100000;
  double oracle_dt = 1e-3;

  CLI::App* train_cmd = app.add_subcommand("train", "train from a config file");
  train_cmd->add_option("--config", config_path, "experiment config file")->required();
  CLI::Option* train_seed = train_cmd->add_option("--seed", seed, "override the seed list");
  train_cmd->add_option("--out", out_dir, "override the output directory");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the MC grid");
  eval_cmd->add_option("--checkpoint", checkpoint_path,
                       "checkpoint file, or a training output directory")->required();
  eval_cmd->add_option("--config", config_path, "experiment config file")->required();
  CLI::Option* eval_seed = eval_cmd->add_option("--seed", seed, "override the seed list");
  eval_cmd->add_option("--out", out_dir, "override the output directory");

  CLI::App* oracle_cmd =
      app.add_subcommand("oracle-check", "cross-check MC against the analytic 1-D series");
  oracle_cmd->add_option("--n-paths", oracle_paths, "MC paths per case");
  oracle_cmd->add_option("--dt", oracle_dt, "MC step size");
  CLI::Option* oracle_seed = oracle_cmd->add_option("--seed", seed, "MC seed");

  CLI::App* recipes_cmd = app.add_subcommand("recipes", "recipe registry");
  CLI::App* recipes_list = recipes_cmd->add_subcommand("list", "list the shipped recipes");

  CLI11_PARSE(app, argc, argv);

  auto out_override = [&]() -> std::optional<std::string> {
    if (out_dir.empty()) return std::nullopt;
    return out_dir;
  };

  if (train_cmd->parsed()) {
    return pirl::run_train(config_path, resolve_seed(train_seed, seed), out_override());
  }
  if (eval_cmd->parsed()) {
    return pirl::run_eval(checkpoint_path, config_path, resolve_seed(eval_seed, seed),
                          out_override());
  }
  if (oracle_cmd->parsed()) {
    pirl::OracleCheckOptions opt;
    opt.n_paths = oracle_paths;
    opt.dt = oracle_dt;
    if (auto s = resolve_seed(oracle_seed, seed)) opt.seed = *s;
    return pirl::run_oracle_check(opt, std::cout);
  }
  if (recipes_cmd->parsed()) {
    if (recipes_list->parsed()) {
      pirl::list_recipes(std::cout);
      return 0;
    }
    std::cerr << "usage: pirl recipes list\n";
    return pirl::kConfigError;
  }
  return 0;
}
