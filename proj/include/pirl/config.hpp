#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pirl/evaluation.hpp"
#include "pirl/system.hpp"
#include "pirl/trainer.hpp"

namespace pirl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Flat `key = value` file: one assignment per line, `#` starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_string(const std::string& text,
                                     const std::string& origin = "<string>") {
    KeyValueConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": expected 'key = value', got '" + line + "'");
      }
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[key] = value;
      cfg.lines_[key] = line_no;
    }
    cfg.origin_ = origin;
    return cfg;
  }

  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected a number for '" + key + "', got '" +
                        it->second + "'");
    }
  }

  long get_long(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": expected an integer for '" + key + "', got '" +
                        it->second + "'");
    }
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                          std::vector<std::uint64_t> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::uint64_t> out;
    for (const auto& part : detail::split(it->second, ',')) {
      try {
        out.push_back(std::stoull(part));
      } catch (const std::exception&) {
        throw ConfigError(where(key) + ": expected comma-separated integers for '" +
                          key + "'");
      }
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    for (const auto& part : detail::split(it->second, ',')) {
      try {
        out.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw ConfigError(where(key) + ": expected comma-separated integers for '" +
                          key + "'");
      }
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  void require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : values_) {
      if (!known.count(key)) {
        throw ConfigError(where(key) + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  std::string where(const std::string& key) const {
    auto it = lines_.find(key);
    const int line = it == lines_.end() ? 0 : it->second;
    return origin_ + ":" + std::to_string(line);
  }

  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;
};

struct EvalConfig {
  int grid_n = 10;
  long n_paths = 10000;
  double tau = 2.0;
  double dt = 0.1;
  std::vector<Eigen::Vector2d> probes;
};

inline SystemSpec make_system(const std::string& id) {
  if (id == "benchmark") return benchmark_system();
  if (id == "interval1d") return driftless_interval_system(1.0, 1.0);
  throw ConfigError("unknown system id '" + id + "'");
}

struct ExperimentConfig {
  std::string system_id = "benchmark";
  TrainConfig train;
  EvalConfig eval;
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "out";

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "system", "seed", "seeds", "out",
        "train.tau", "train.tau_d", "train.dt", "train.eps_payoff",
        "train.lambda", "train.mu", "train.data_weight",
        "train.batch_data", "train.batch_pde", "train.batch_boundary",
        "train.episodes", "train.replay_capacity",
        "train.eps_start", "train.eps_end", "train.eps_decay_fraction",
        "train.learning_rate", "train.optimizer", "train.target_eta",
        "train.reward", "train.shaping_c", "train.pde_update_every",
        "train.checkpoint_every", "train.hidden",
        "eval.grid", "eval.n_paths", "eval.tau", "eval.dt", "eval.probes",
    };
    return keys;
  }

  static ExperimentConfig from_kv(const KeyValueConfig& kv) {
    kv.require_known(known_keys());
    ExperimentConfig cfg;
    cfg.system_id = kv.get_string("system", cfg.system_id);
    make_system(cfg.system_id);  // validates the id

    TrainConfig& t = cfg.train;
    t.tau = kv.get_double("train.tau", t.tau);
    t.tau_d = kv.get_double("train.tau_d", t.tau_d);
    t.dt = kv.get_double("train.dt", t.dt);
    t.eps_payoff = kv.get_double("train.eps_payoff", t.eps_payoff);
    t.lambda = kv.get_double("train.lambda", t.lambda);
    t.mu = kv.get_double("train.mu", t.mu);
    t.data_weight = kv.get_double("train.data_weight", t.data_weight);
    t.batch_data = static_cast<int>(kv.get_long("train.batch_data", t.batch_data));
    t.batch_pde = static_cast<int>(kv.get_long("train.batch_pde", t.batch_pde));
    t.batch_boundary = static_cast<int>(kv.get_long("train.batch_boundary", t.batch_boundary));
    t.episodes = static_cast<int>(kv.get_long("train.episodes", t.episodes));
    t.replay_capacity = static_cast<std::size_t>(
        kv.get_long("train.replay_capacity", static_cast<long>(t.replay_capacity)));
    t.eps_start = kv.get_double("train.eps_start", t.eps_start);
    t.eps_end = kv.get_double("train.eps_end", t.eps_end);
    t.eps_decay_fraction = kv.get_double("train.eps_decay_fraction", t.eps_decay_fraction);
    t.learning_rate = kv.get_double("train.learning_rate", t.learning_rate);
    const std::string optimizer = kv.get_string("train.optimizer", "adam");
    if (optimizer == "adam") {
      t.use_sgd = false;
    } else if (optimizer == "sgd") {
      t.use_sgd = true;
    } else {
      throw ConfigError("train.optimizer must be 'adam' or 'sgd', got '" + optimizer + "'");
    }
    t.target_eta = kv.get_double("train.target_eta", t.target_eta);
    const std::string reward = kv.get_string("train.reward", "binary");
    if (reward == "binary") {
      t.reward_mode = RewardMode::binary;
    } else if (reward == "smoothed") {
      t.reward_mode = RewardMode::smoothed;
    } else if (reward == "shaped") {
      t.reward_mode = RewardMode::shaped;
    } else {
      throw ConfigError("train.reward must be binary|smoothed|shaped, got '" + reward + "'");
    }
    t.shaping_coeff = kv.get_double("train.shaping_c", t.shaping_coeff);
    t.pde_update_every = static_cast<int>(kv.get_long("train.pde_update_every", t.pde_update_every));
    t.checkpoint_every = static_cast<int>(kv.get_long("train.checkpoint_every", t.checkpoint_every));
    t.hidden_layers = kv.get_int_list("train.hidden", t.hidden_layers);

    cfg.eval.grid_n = static_cast<int>(kv.get_long("eval.grid", cfg.eval.grid_n));
    cfg.eval.n_paths = kv.get_long("eval.n_paths", cfg.eval.n_paths);
    cfg.eval.tau = kv.get_double("eval.tau", t.tau);
    cfg.eval.dt = kv.get_double("eval.dt", t.dt);
    if (kv.has("eval.probes")) {
      for (const auto& pair : detail::split(kv.get_string("eval.probes", ""), ';')) {
        std::stringstream ss(pair);
        double a = 0, b = 0;
        if (!(ss >> a >> b)) {
          throw ConfigError("eval.probes: expected 'x1 x2; x1 x2; ...', got '" + pair + "'");
        }
        cfg.eval.probes.emplace_back(a, b);
      }
    }

    if (kv.has("seeds")) {
      cfg.seeds = kv.get_u64_list("seeds", cfg.seeds);
    } else if (kv.has("seed")) {
      cfg.seeds = {static_cast<std::uint64_t>(kv.get_long("seed", 0))};
    }
    if (cfg.seeds.empty()) throw ConfigError("seed list must not be empty");
    cfg.out_dir = kv.get_string("out", cfg.out_dir);

    t.validate();
    return cfg;
  }

  static ExperimentConfig from_file(const std::string& path) {
    return from_kv(KeyValueConfig::parse_file(path));
  }

  /// Canonical serialization of everything that shapes training. Hash of
  /// this text ties checkpoints to the configuration that produced them.
  std::string canonical_train_text() const {
    using detail::format_double;
    std::ostringstream out;
    out << "system=" << system_id << '\n'
        << "train.tau=" << format_double(train.tau) << '\n'
        << "train.tau_d=" << format_double(train.tau_d) << '\n'
        << "train.dt=" << format_double(train.dt) << '\n'
        << "train.eps_payoff=" << format_double(train.eps_payoff) << '\n'
        << "train.lambda=" << format_double(train.lambda) << '\n'
        << "train.mu=" << format_double(train.mu) << '\n'
        << "train.data_weight=" << format_double(train.data_weight) << '\n'
        << "train.batch_data=" << train.batch_data << '\n'
        << "train.batch_pde=" << train.batch_pde << '\n'
        << "train.batch_boundary=" << train.batch_boundary << '\n'
        << "train.episodes=" << train.episodes << '\n'
        << "train.replay_capacity=" << train.replay_capacity << '\n'
        << "train.eps_start=" << format_double(train.eps_start) << '\n'
        << "train.eps_end=" << format_double(train.eps_end) << '\n'
        << "train.eps_decay_fraction=" << format_double(train.eps_decay_fraction) << '\n'
        << "train.learning_rate=" << format_double(train.learning_rate) << '\n'
        << "train.optimizer=" << (train.use_sgd ? "sgd" : "adam") << '\n'
        << "train.target_eta=" << format_double(train.target_eta) << '\n'
        << "train.reward="
        << (train.reward_mode == RewardMode::binary
                ? "binary"
                : train.reward_mode == RewardMode::smoothed ? "smoothed" : "shaped")
        << '\n'
        << "train.shaping_c=" << format_double(train.shaping_coeff) << '\n'
        << "train.pde_update_every=" << train.pde_update_every << '\n'
        << "train.hidden=";
    for (std::size_t i = 0; i < train.hidden_layers.size(); ++i) {
      if (i) out << ',';
      out << train.hidden_layers[i];
    }
    out << '\n';
    return out.str();
  }

  std::uint64_t config_hash() const {
    // FNV-1a, 64 bit
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_train_text()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

}  // namespace pirl
