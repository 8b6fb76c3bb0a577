#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pirl/config.hpp"
#include "pirl/evaluation.hpp"
#include "pirl/network.hpp"
#include "pirl/trainer.hpp"

namespace pirl {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kMissingFile = 3,
  kNonFiniteLoss = 4,
  kCheckpointMismatch = 5,
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, h);
  return buf;
}

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_metrics_csv(const std::string& path,
                              const std::vector<EpisodeRow>& metrics,
                              std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write metrics file: " + path);
  out << "# config_hash=" << detail::hash_hex(config_hash) << "\n";
  out << "episode,steps,return,epsilon,loss_total,loss_data,loss_pde,"
         "loss_boundary,cum_unsafe_events,wall_ms\n";
  for (const auto& r : metrics) {
    out << r.episode << ',' << r.steps << ',' << detail::csv_double(r.ret) << ','
        << detail::csv_double(r.epsilon) << ',' << detail::csv_double(r.loss_total)
        << ',' << detail::csv_double(r.loss_data) << ','
        << detail::csv_double(r.loss_pde) << ',' << detail::csv_double(r.loss_boundary)
        << ',' << r.cum_unsafe_events << ',' << detail::csv_double(r.wall_ms) << '\n';
  }
}

inline void write_eval_csv(const std::string& path, const EvalReport& report,
                           std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write eval file: " + path);
  out << "# config_hash=" << detail::hash_hex(config_hash) << "\n";
  out << "x1,x2,prediction,mc_mean,mc_se\n";
  for (const auto& p : report.points) {
    out << detail::csv_double(p.x1) << ',' << detail::csv_double(p.x2) << ','
        << detail::csv_double(p.prediction) << ',' << detail::csv_double(p.mc_mean)
        << ',' << detail::csv_double(p.mc_se) << '\n';
  }
}

/// Trains every seed in the config, writing per-seed metrics CSV, final
/// checkpoint and a JSON run summary into the output directory.
inline int run_train(const std::string& config_path,
                     std::optional<std::uint64_t> seed_override,
                     std::optional<std::string> out_override,
                     std::ostream& log = std::cerr) {
  ExperimentConfig config;
  try {
    config = ExperimentConfig::from_file(config_path);
  } catch (const FileError& e) {
    log << "error: " << e.what() << "\n";
    return kMissingFile;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
  if (seed_override) config.seeds = {*seed_override};
  if (out_override) config.out_dir = *out_override;

  const SystemSpec spec = make_system(config.system_id);
  const std::uint64_t hash = config.config_hash();
  std::filesystem::create_directories(config.out_dir);

  for (std::uint64_t seed : config.seeds) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    const std::string tag = "seed" + std::to_string(seed);
    const std::string dir = config.out_dir;

    auto checkpoint_cb = [&](int episode, const QNetwork& net) {
      save_network(net, dir + "/checkpoint_" + tag + "_ep" + std::to_string(episode + 1) + ".net",
                   hash);
    };
    log << "training " << tag << " (" << tc.episodes << " episodes)\n";
    const TrainResult result = train(spec, tc, checkpoint_cb);

    write_metrics_csv(dir + "/metrics_" + tag + ".csv", result.metrics, hash);
    save_network(result.net, dir + "/checkpoint_" + tag + ".net", hash);

    nlohmann::json summary;
    summary["config_hash"] = detail::hash_hex(hash);
    summary["system"] = config.system_id;
    summary["seed"] = seed;
    summary["episodes"] = result.metrics.size();
    summary["cum_unsafe_events"] = count_unsafe_events(result.metrics);
    summary["aborted"] = result.aborted;
    if (result.aborted) summary["abort_reason"] = result.abort_reason;
    double wall = 0.0;
    for (const auto& r : result.metrics) wall += r.wall_ms;
    summary["wall_ms_total"] = wall;
    std::ofstream(dir + "/summary_" + tag + ".json") << summary.dump(2) << "\n";

    if (result.aborted) {
      log << "error: " << result.abort_reason << "\n";
      return kNonFiniteLoss;
    }
  }
  return kOk;
}

namespace detail {

inline nlohmann::json probe_comparison(const SystemSpec& spec, const QNetwork& net,
                                       const EvalConfig& eval, std::uint64_t seed) {
  nlohmann::json probes = nlohmann::json::array();
  const ControlPolicy learned = greedy_policy(net, spec);
  const ControlPolicy nominal = nominal_policy(spec);
  for (std::size_t i = 0; i < eval.probes.size(); ++i) {
    const Eigen::VectorXd x = eval.probes[i];
    const McEstimate learned_mc = mc_safety_probability(
        spec, learned, x, eval.tau, eval.dt, eval.n_paths, stream_seed(seed, 1000 + i));
    const McEstimate nominal_mc = mc_safety_probability(
        spec, nominal, x, eval.tau, eval.dt, eval.n_paths, stream_seed(seed, 2000 + i));
    const AugmentedState s{eval.tau, x};
    probes.push_back({{"x", {x[0], x[1]}},
                      {"prediction", net.forward(s.to_vector()).maxCoeff()},
                      {"learned_mc", learned_mc.mean},
                      {"learned_se", learned_mc.std_error},
                      {"nominal_mc", nominal_mc.mean},
                      {"nominal_se", nominal_mc.std_error}});
  }
  return probes;
}

}  // namespace detail

/// Evaluates a checkpoint (or, given a directory, the per-seed checkpoints in
/// it) on the MC grid and writes the report CSV plus a JSON summary. Rejects
/// checkpoints whose recorded config hash does not match the config.
inline int run_eval(const std::string& checkpoint_path, const std::string& config_path,
                    std::optional<std::uint64_t> seed_override,
                    std::optional<std::string> out_override,
                    std::ostream& log = std::cerr) {
  ExperimentConfig config;
  try {
    config = ExperimentConfig::from_file(config_path);
  } catch (const FileError& e) {
    log << "error: " << e.what() << "\n";
    return kMissingFile;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
  if (seed_override) config.seeds = {*seed_override};
  if (out_override) config.out_dir = *out_override;

  const SystemSpec spec = make_system(config.system_id);
  const std::uint64_t hash = config.config_hash();
  std::filesystem::create_directories(config.out_dir);

  struct Entry {
    std::string path;
    std::uint64_t seed;
    std::string tag;
  };
  std::vector<Entry> entries;
  if (std::filesystem::is_directory(checkpoint_path)) {
    for (std::uint64_t seed : config.seeds) {
      const std::string tag = "seed" + std::to_string(seed);
      entries.push_back({checkpoint_path + "/checkpoint_" + tag + ".net", seed, tag});
    }
  } else {
    entries.push_back({checkpoint_path, config.seeds.front(),
                       "seed" + std::to_string(config.seeds.front())});
  }

  nlohmann::json summary;
  summary["config_hash"] = detail::hash_hex(hash);
  summary["system"] = config.system_id;
  summary["tau"] = config.eval.tau;
  summary["dt"] = config.eval.dt;
  summary["grid"] = config.eval.grid_n;
  summary["n_paths"] = config.eval.n_paths;
  std::vector<double> mses;
  nlohmann::json per_seed = nlohmann::json::array();

  for (const Entry& entry : entries) {
    if (!std::filesystem::exists(entry.path)) {
      log << "error: checkpoint not found: " << entry.path << "\n";
      return kMissingFile;
    }
    LoadedNetwork loaded;
    try {
      loaded = load_network(entry.path);
    } catch (const CheckpointError& e) {
      log << "error: " << e.what() << "\n";
      return kCheckpointMismatch;
    }
    if (loaded.config_hash != hash) {
      log << "error: checkpoint " << entry.path << " was trained under config hash "
          << detail::hash_hex(loaded.config_hash) << ", expected "
          << detail::hash_hex(hash) << "\n";
      return kCheckpointMismatch;
    }

    EvalReport report;
    try {
      report = grid_mse(loaded.net, spec, greedy_policy(loaded.net, spec),
                        config.eval.tau, config.eval.dt, config.eval.grid_n,
                        config.eval.n_paths, entry.seed);
    } catch (const std::invalid_argument& e) {
      log << "error: " << e.what() << "\n";
      return kConfigError;
    }
    write_eval_csv(config.out_dir + "/eval_" + entry.tag + ".csv", report, hash);
    mses.push_back(report.mse);
    nlohmann::json one;
    one["seed"] = entry.seed;
    one["mse"] = report.mse;
    if (!config.eval.probes.empty() && config.system_id == "benchmark") {
      one["probes"] = detail::probe_comparison(spec, loaded.net, config.eval, entry.seed);
    }
    per_seed.push_back(one);
    log << "eval " << entry.tag << ": mse=" << report.mse << "\n";
  }

  double mean = 0.0;
  for (double m : mses) mean += m;
  mean /= static_cast<double>(mses.size());
  double var = 0.0;
  for (double m : mses) var += (m - mean) * (m - mean);
  const double stddev = mses.size() > 1 ? std::sqrt(var / (mses.size() - 1)) : 0.0;

  summary["per_seed"] = per_seed;
  summary["mse_mean"] = mean;
  summary["mse_std"] = stddev;
  std::ofstream(config.out_dir + "/eval_summary.json") << summary.dump(2) << "\n";
  return kOk;
}

struct OracleCheckOptions {
  long n_paths = 100000;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  double mc_bias = 0.0;  // test hook: shifts the MC mean to provoke a failure
};

/// Cross-checks the MC machinery against the analytic interval-survival
/// series on three (halfwidth, sigma, t) cases, using the bridge-corrected
/// estimator so both sides describe the continuous-time quantity. Exit 0
/// unless a case fails conclusively; a confidence interval wider than 0.1 is
/// inconclusive.
inline int run_oracle_check(const OracleCheckOptions& opt, std::ostream& out) {
  struct Case {
    double a, sigma, t;
  };
  const Case cases[] = {{1.0, 1.0, 0.5}, {1.0, 1.0, 1.0}, {2.0, 1.0, 1.0}};
  bool any_fail = false;
  out << "  a  sigma    t     series        mc        se   verdict\n";
  for (std::size_t i = 0; i < 3; ++i) {
    const Case& c = cases[i];
    const double series = analytic_survival_1d(c.a, c.t, c.sigma, 64);
    McEstimate mc = mc_interval_survival_continuous(c.a, c.sigma, c.t, opt.dt,
                                                    opt.n_paths, stream_seed(opt.seed, i));
    mc.mean += opt.mc_bias;
    const double gap = std::abs(mc.mean - series);
    std::string verdict;
    if (3.0 * mc.std_error >= 0.1) {
      verdict = "INCONCLUSIVE (3*se too wide)";
    } else if (gap < 3.0 * mc.std_error) {
      verdict = "PASS";
    } else {
      verdict = "FAIL";
      any_fail = true;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%3g  %5g  %3g  %9.6f  %9.6f  %8.6f   %s\n",
                  c.a, c.sigma, c.t, series, mc.mean, mc.std_error, verdict.c_str());
    out << line;
  }
  out << (any_fail ? "oracle check: FAIL\n" : "oracle check: ok\n");
  return any_fail ? 1 : kOk;
}

struct Recipe {
  const char* name;
  const char* file;
  const char* description;
};

inline const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> table = {
      {"fig1", "recipes/fig1.cfg",
       "full training, then probe-state comparison against the nominal controller"},
      {"fig2_shaping", "recipes/fig2_shaping.cfg",
       "reward-shaping baseline (dense reward, c=0.05, no physics terms)"},
      {"fig3_pirl", "recipes/fig3_pirl.cfg",
       "learning curve, full physics-informed loss (lambda=1e-2, mu=1)"},
      {"fig3_boundary", "recipes/fig3_boundary.cfg",
       "learning curve, boundary conditions only (lambda=0, mu=1)"},
      {"fig3_dqn", "recipes/fig3_dqn.cfg",
       "learning curve, plain DQN (lambda=0, mu=0)"},
      {"fig4_tauD10_pde", "recipes/fig4_tauD10_pde.cfg",
       "short-horizon data tau_D=1.0 with PDE loss (lambda=3e-3)"},
      {"fig4_tauD10_nopde", "recipes/fig4_tauD10_nopde.cfg",
       "short-horizon data tau_D=1.0 without PDE loss"},
      {"fig4_tauD15_pde", "recipes/fig4_tauD15_pde.cfg",
       "tau_D=1.5 with PDE loss (lambda=5e-3)"},
      {"fig4_tauD15_nopde", "recipes/fig4_tauD15_nopde.cfg",
       "tau_D=1.5 without PDE loss"},
      {"fig4_tauD20_pde", "recipes/fig4_tauD20_pde.cfg",
       "tau_D=2.0 with PDE loss (lambda=1e-2)"},
      {"fig4_tauD20_nopde", "recipes/fig4_tauD20_nopde.cfg",
       "tau_D=2.0 without PDE loss"},
  };
  return table;
}

inline void list_recipes(std::ostream& out) {
  for (const Recipe& r : recipes()) {
    out << r.name << "\t" << r.file << "\n    " << r.description << "\n";
  }
}

}  // namespace pirl
