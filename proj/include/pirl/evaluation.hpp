#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "pirl/augmented.hpp"
#include "pirl/network.hpp"
#include "pirl/rng.hpp"
#include "pirl/system.hpp"
#include "pirl/trainer.hpp"

namespace pirl {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n_paths = 0;
};

/// Monte-Carlo estimate of the safety probability: the fraction of simulated
/// paths that stay in the safe set at every grid time k = 0..floor(tau/dt).
/// Path i uses Rng::stream(seed, i), so the result is independent of the
/// number of worker threads and of scheduling.
inline McEstimate mc_safety_probability(const SystemSpec& spec,
                                        const ControlPolicy& policy,
                                        const Eigen::VectorXd& x0, double tau,
                                        double dt, long n_paths,
                                        std::uint64_t seed, int n_threads = 0) {
  McEstimate est;
  est.n_paths = n_paths;
  if (n_paths < 1) return est;
  if (!spec.safe_membership(x0)) {
    std::cerr << "mc_safety_probability: initial state outside the safe set, "
                 "probability is 0\n";
    return est;
  }

  const long n_steps = static_cast<long>(std::floor(tau / dt + 1e-9));
  auto survive = [&](long path) -> bool {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(path));
    Eigen::VectorXd x = x0;
    for (long k = 0; k < n_steps; ++k) {
      const AugmentedState s{tau - static_cast<double>(k) * dt, x};
      const Eigen::VectorXd u = policy(s);
      x = euler_maruyama_step(spec, x, u, dt, rng.normal_vector(spec.state_dim, std::sqrt(dt)));
      if (!spec.safe_membership(x)) return false;
    }
    return true;
  };

  long hits = 0;
  int workers = n_threads > 0 ? n_threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, static_cast<int>(std::min<long>(workers, n_paths)));
  if (workers == 1) {
    for (long p = 0; p < n_paths; ++p) hits += survive(p) ? 1 : 0;
  } else {
    std::vector<long> partial(workers, 0);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        long local = 0;
        for (long p = w; p < n_paths; p += workers) local += survive(p) ? 1 : 0;
        partial[w] = local;
      });
    }
    for (auto& t : pool) t.join();
    for (long c : partial) hits += c;
  }

  est.mean = static_cast<double>(hits) / static_cast<double>(n_paths);
  est.std_error = std::sqrt(est.mean * (1.0 - est.mean) / static_cast<double>(n_paths));
  return est;
}

/// Survival probability of driftless Brownian motion on (-a, a) started at 0,
/// by the absorbing-boundary eigenfunction series
///   P(t) = (4/pi) sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2 sigma^2 t / (8 a^2)).
/// At t = 0 the series only converges conditionally, so the exact limit 1 is
/// returned directly. For t > 0 the truncation error is below the first
/// omitted term.
inline double analytic_survival_1d(double halfwidth, double t, double sigma,
                                   int terms) {
  if (halfwidth <= 0.0) throw std::invalid_argument("analytic_survival_1d: halfwidth must be positive");
  if (terms < 1) throw std::invalid_argument("analytic_survival_1d: need at least one term");
  if (t <= 0.0) return 1.0;
  const double rate = M_PI * M_PI * sigma * sigma * t / (8.0 * halfwidth * halfwidth);
  double sum = 0.0;
  for (int k = 0; k < terms; ++k) {
    const double odd = 2.0 * k + 1.0;
    const double term = std::exp(-odd * odd * rate) / odd;
    sum += (k % 2 == 0 ? term : -term);
  }
  return 4.0 / M_PI * sum;
}

/// MC estimate of the continuous-time survival on (-halfwidth, halfwidth)
/// for driftless Brownian motion started at 0. Checking the barrier only at
/// grid times overstates survival by O(sqrt(dt)) (the effective barrier
/// shifts by about 0.5826 sigma sqrt(dt)), so each step additionally applies
/// the Brownian-bridge crossing test, which is exact for this dynamics:
/// given both endpoints inside, the bridge hits a barrier b with probability
/// exp(-2 (b - x)(b - x') / (sigma^2 dt)). This is the estimator to compare
/// against analytic_survival_1d; the discrete-time estimator above is the
/// reference for everything the networks learn.
inline McEstimate mc_interval_survival_continuous(double halfwidth, double sigma,
                                                  double t, double dt, long n_paths,
                                                  std::uint64_t seed,
                                                  int n_threads = 0) {
  McEstimate est;
  est.n_paths = n_paths;
  if (n_paths < 1) return est;
  const long n_steps = static_cast<long>(std::floor(t / dt + 1e-9));
  const double step_var = sigma * sigma * dt;

  auto survive = [&](long path) -> bool {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(path));
    double x = 0.0;
    for (long k = 0; k < n_steps; ++k) {
      const double x_next = x + sigma * std::sqrt(dt) * rng.normal();
      if (std::abs(x_next) >= halfwidth) return false;
      const double p_up = std::exp(-2.0 * (halfwidth - x) * (halfwidth - x_next) / step_var);
      const double p_dn = std::exp(-2.0 * (halfwidth + x) * (halfwidth + x_next) / step_var);
      const double p_cross = p_up + p_dn - p_up * p_dn;
      if (rng.uniform() < p_cross) return false;
      x = x_next;
    }
    return true;
  };

  long hits = 0;
  int workers = n_threads > 0 ? n_threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, static_cast<int>(std::min<long>(workers, n_paths)));
  if (workers == 1) {
    for (long p = 0; p < n_paths; ++p) hits += survive(p) ? 1 : 0;
  } else {
    std::vector<long> partial(workers, 0);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        long local = 0;
        for (long p = w; p < n_paths; p += workers) local += survive(p) ? 1 : 0;
        partial[w] = local;
      });
    }
    for (auto& t_ : pool) t_.join();
    for (long c : partial) hits += c;
  }
  est.mean = static_cast<double>(hits) / static_cast<double>(n_paths);
  est.std_error = std::sqrt(est.mean * (1.0 - est.mean) / static_cast<double>(n_paths));
  return est;
}

/// 1-D system with zero drift, constant diffusion and safe set (-a, a);
/// control has no effect. Companion to analytic_survival_1d.
inline SystemSpec driftless_interval_system(double halfwidth, double sigma) {
  SystemSpec spec;
  spec.state_dim = 1;
  spec.action_set = {Eigen::VectorXd::Zero(1)};
  spec.drift = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(1));
  };
  spec.diffusion = [sigma](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(sigma * Eigen::MatrixXd::Identity(1, 1));
  };
  spec.safe_membership = [halfwidth](const Eigen::VectorXd& x) {
    return std::abs(x[0]) < halfwidth;
  };
  spec.unsafe_distance = [halfwidth](const Eigen::VectorXd& x) {
    return std::max(0.0, halfwidth - std::abs(x[0]));
  };
  spec.safety_margin = [halfwidth](const Eigen::VectorXd& x) {
    return halfwidth - std::abs(x[0]);
  };
  spec.init_domain = {Eigen::VectorXd::Constant(1, -halfwidth),
                      Eigen::VectorXd::Constant(1, halfwidth)};
  spec.pde_domain = {Eigen::VectorXd::Constant(1, -0.9 * halfwidth),
                     Eigen::VectorXd::Constant(1, 0.9 * halfwidth)};
  spec.boundary_domain = {
      {Eigen::VectorXd::Constant(1, -halfwidth), Eigen::VectorXd::Constant(1, -halfwidth)},
      {Eigen::VectorXd::Constant(1, halfwidth), Eigen::VectorXd::Constant(1, halfwidth)},
  };
  return spec;
}

/// Greedy policy induced by a value network.
inline ControlPolicy greedy_policy(const QNetwork& net, const SystemSpec& spec) {
  return [&net, &spec](const AugmentedState& s) {
    return spec.action_set[net.greedy_action(s.to_vector())];
  };
}

struct EvalPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double prediction = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
};

struct EvalReport {
  std::vector<EvalPoint> points;
  double mse = 0.0;
  double mse_std = 0.0;  // std over repeated runs; 0 for a single report
  int grid_n = 0;
};

inline double report_mse(const std::vector<EvalPoint>& points) {
  double sum = 0.0;
  for (const auto& p : points) {
    const double e = p.prediction - p.mc_mean;
    sum += e * e;
  }
  return points.empty() ? 0.0 : sum / static_cast<double>(points.size());
}

/// Network accuracy on a grid_n x grid_n grid of cell centers over the init
/// domain: the raw prediction max_a Q([tau, x], a) against the Monte-Carlo
/// value under `policy`. The prediction is deliberately not clamped to
/// [0, 1]: overshoot beyond the probability range is exactly the failure
/// mode this report exists to measure on horizons the data never reached.
/// Point (i,j) draws from stream (seed, i*grid_n+j).
inline EvalReport grid_mse(const QNetwork& net, const SystemSpec& spec,
                           const ControlPolicy& policy, double tau, double dt,
                           int grid_n, long n_paths, std::uint64_t seed,
                           int n_threads = 0) {
  if (spec.state_dim != 2) throw std::invalid_argument("grid_mse: needs a 2-D system");
  EvalReport report;
  report.grid_n = grid_n;
  report.points.resize(static_cast<std::size_t>(grid_n) * grid_n);

  const Eigen::VectorXd& lo = spec.init_domain.lo;
  const Eigen::VectorXd& hi = spec.init_domain.hi;
  auto eval_point = [&](int idx) {
    const int i = idx / grid_n;
    const int j = idx % grid_n;
    Eigen::VectorXd x(2);
    x[0] = lo[0] + (i + 0.5) * (hi[0] - lo[0]) / grid_n;
    x[1] = lo[1] + (j + 0.5) * (hi[1] - lo[1]) / grid_n;
    const AugmentedState s{tau, x};
    const double q = net.forward(s.to_vector()).maxCoeff();
    const McEstimate mc = mc_safety_probability(
        spec, policy, x, tau, dt, n_paths, stream_seed(seed, idx), 1);
    report.points[idx] = {x[0], x[1], q, mc.mean, mc.std_error};
  };

  const int total = grid_n * grid_n;
  int workers = n_threads > 0 ? n_threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, total));
  if (workers == 1) {
    for (int idx = 0; idx < total; ++idx) eval_point(idx);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (int idx = w; idx < total; idx += workers) eval_point(idx);
      });
    }
    for (auto& t : pool) t.join();
  }
  report.mse = report_mse(report.points);
  return report;
}

/// Final cumulative count of episodes that left the safe set in-horizon.
inline long count_unsafe_events(const std::vector<EpisodeRow>& metrics) {
  return metrics.empty() ? 0 : metrics.back().cum_unsafe_events;
}

/// Baseline controller for the benchmark: exact feedback linearization via
/// z1 = x1, z2 = -x1^3 - x2 (so z1' = z2, z2' = v) with the linear-quadratic
/// feedback v = -z1 - sqrt(3) z2 (unit state and input weights), clamped to
/// [-1,1] and snapped to the nearest discrete action.
inline Eigen::VectorXd nominal_controller(const SystemSpec& spec,
                                          const Eigen::VectorXd& x) {
  const double z1 = x[0];
  const double z2 = -x[0] * x[0] * x[0] - x[1];
  const double v = -z1 - std::sqrt(3.0) * z2;
  const double u_raw = -3.0 * x[0] * x[0] * z2 - x[0] - x[1] - v;
  const double u = std::clamp(u_raw, -1.0, 1.0);

  int best = 0;
  double best_dist = std::abs(spec.action_set[0][0] - u);
  for (int i = 1; i < spec.action_count(); ++i) {
    const double d = std::abs(spec.action_set[i][0] - u);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return spec.action_set[best];
}

inline ControlPolicy nominal_policy(const SystemSpec& spec) {
  return [&spec](const AugmentedState& s) { return nominal_controller(spec, s.x); };
}

}  // namespace pirl
