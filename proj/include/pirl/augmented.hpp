#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "pirl/system.hpp"

namespace pirl {

/// Physical state extended with the remaining horizon, s = [h, x].
struct AugmentedState {
  double h = 0.0;
  Eigen::VectorXd x;

  int dim() const { return static_cast<int>(x.size()) + 1; }

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd s(dim());
    s[0] = h;
    s.tail(x.size()) = x;
    return s;
  }
};

/// Absolute guard on the horizon comparison. Repeated h -= dt accumulates at
/// most a few 1e-13 of rounding over any episode we run, so a state whose
/// true horizon is 0 is never misread as expired.
inline constexpr double kHorizonTol = 1e-12;

/// Snaps a horizon within dt*1e-9 of zero to exactly zero before window
/// tests, so the final-step reward is robust to decrement rounding.
inline double snap_horizon(double h, double dt) {
  return std::abs(h) < dt * 1e-9 ? 0.0 : h;
}

inline bool is_absorbing(const SystemSpec& spec, const AugmentedState& s) {
  return s.h < -kHorizonTol || !spec.safe_membership(s.x);
}

/// Transition of the augmented process: absorbing states self-loop, all other
/// states decrement the horizon and advance the physical state.
inline AugmentedState step(const SystemSpec& spec, const AugmentedState& s,
                           const Eigen::VectorXd& u, double dt,
                           const Eigen::VectorXd& dW) {
  if (is_absorbing(spec, s)) return s;
  return {s.h - dt, euler_maruyama_step(spec, s.x, u, dt, dW)};
}

/// Binary reward: 1 exactly when the horizon lies in [0, dt) and the state is
/// not absorbing. Summed along a path this reproduces the safety indicator.
inline double reward(const SystemSpec& spec, const AugmentedState& s, double dt) {
  const double h = snap_horizon(s.h, dt);
  const bool in_window = h >= 0.0 && h < dt * (1.0 - 1e-9);
  return (in_window && !is_absorbing(spec, s)) ? 1.0 : 0.0;
}

/// Reward with the indicator payoff replaced by the Lipschitz ramp.
inline double smoothed_reward(const SystemSpec& spec, const AugmentedState& s,
                              double dt, double eps) {
  return reward(spec, s, dt) * smoothed_payoff(spec, s.x, eps);
}

using ControlPolicy = std::function<Eigen::VectorXd(const AugmentedState&)>;

struct TrajectoryStep {
  AugmentedState s;
  Eigen::VectorXd action;
  double reward;
  AugmentedState s_next;
  bool terminal;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double ret = 0.0;        // additive return, 0 or 1 under the binary reward
  bool unsafe_flag = false;  // left the safe set within the horizon
};

/// Runs one episode until the first entry to the absorbing set.
inline Trajectory rollout(const SystemSpec& spec, const ControlPolicy& policy,
                          const AugmentedState& s0, double dt, Rng& rng) {
  Trajectory traj;
  AugmentedState s = s0;
  while (!is_absorbing(spec, s)) {
    const double r = reward(spec, s, dt);
    const Eigen::VectorXd u = policy(s);
    const Eigen::VectorXd dW = rng.normal_vector(spec.state_dim, std::sqrt(dt));
    AugmentedState next = step(spec, s, u, dt, dW);
    const bool terminal = is_absorbing(spec, next);
    traj.ret += r;
    traj.steps.push_back({s, u, r, std::move(next), terminal});
    s = traj.steps.back().s_next;
  }
  traj.unsafe_flag = !spec.safe_membership(s.x) && s.h >= -kHorizonTol;
  return traj;
}

}  // namespace pirl
