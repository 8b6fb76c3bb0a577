#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pirl/augmented.hpp"
#include "pirl/network.hpp"
#include "pirl/optimizer.hpp"
#include "pirl/replay.hpp"
#include "pirl/sampling.hpp"
#include "pirl/system.hpp"

namespace pirl {

enum class RewardMode { binary, smoothed, shaped };

struct TrainConfig {
  double tau = 2.0;     // outlook horizon the losses are imposed on
  double tau_d = 2.0;   // episode horizon, may be shorter than tau
  double dt = 0.1;
  double eps_payoff = 0.1;  // ramp width of the smoothed payoff
  double lambda = 1e-2;     // PDE loss weight
  double mu = 1.0;          // boundary loss weight
  double data_weight = 1.0; // scales the TD term; test hook, 1 in normal use
  int batch_data = 64;
  int batch_pde = 64;
  int batch_boundary = 64;
  int episodes = 3000;
  std::size_t replay_capacity = 100000;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // fraction of episodes spent decaying
  double learning_rate = 5e-4;
  bool use_sgd = false;
  double target_eta = 0.005;
  std::uint64_t seed = 0;
  RewardMode reward_mode = RewardMode::binary;
  double shaping_coeff = 0.05;
  int pde_update_every = 1;  // redraw collocation/boundary batches every k steps
  int checkpoint_every = 0;  // episodes between checkpoint callbacks, 0 = off
  std::vector<int> hidden_layers = {32, 32, 32};

  void validate() const {
    if (!(tau_d > 0.0 && tau_d <= tau)) {
      throw std::invalid_argument("TrainConfig: need 0 < tau_d <= tau");
    }
    if (dt <= 0.0) throw std::invalid_argument("TrainConfig: dt must be positive");
    if (eps_payoff <= 0.0) throw std::invalid_argument("TrainConfig: eps_payoff must be positive");
    if (lambda < 0.0 || mu < 0.0 || data_weight < 0.0) {
      throw std::invalid_argument("TrainConfig: loss weights must be nonnegative");
    }
    if (batch_data < 1 || batch_pde < 1 || batch_boundary < 1) {
      throw std::invalid_argument("TrainConfig: batch sizes must be at least 1");
    }
    if (episodes < 0) throw std::invalid_argument("TrainConfig: episodes must be nonnegative");
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (!(target_eta > 0.0 && target_eta <= 1.0)) {
      throw std::invalid_argument("TrainConfig: target_eta must be in (0, 1]");
    }
    if (pde_update_every < 1) throw std::invalid_argument("TrainConfig: pde_update_every must be >= 1");
    if (hidden_layers.empty()) throw std::invalid_argument("TrainConfig: need at least one hidden layer");
  }

  std::vector<int> layer_sizes(const SystemSpec& spec) const {
    std::vector<int> sizes;
    sizes.push_back(spec.state_dim + 1);
    for (int h : hidden_layers) sizes.push_back(h);
    sizes.push_back(spec.action_count());
    return sizes;
  }
};

/// One log row per training episode.
struct EpisodeRow {
  int episode = 0;
  int steps = 0;
  double ret = 0.0;  // binary episode return (the safety indicator)
  double epsilon = 0.0;
  double loss_total = 0.0;
  double loss_data = 0.0;
  double loss_pde = 0.0;
  double loss_boundary = 0.0;
  long cum_unsafe_events = 0;
  double wall_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Loss pieces
// ---------------------------------------------------------------------------

/// TD targets from the frozen target network, undiscounted:
/// y = r for terminal transitions, else r + max_a Qhat(s', a).
inline std::vector<double> td_targets(const std::vector<Transition>& batch,
                                      const TargetNetwork& target) {
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const Transition& t : batch) {
    if (t.terminal) {
      targets.push_back(t.reward);
    } else {
      targets.push_back(t.reward + target.forward(t.s_next.to_vector()).maxCoeff());
    }
  }
  return targets;
}

inline double data_loss(const QNetwork& net, const std::vector<Transition>& batch,
                        const std::vector<double>& targets) {
  if (batch.empty()) throw std::invalid_argument("data_loss: empty batch");
  double sum = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double q = net.forward(batch[j].s.to_vector())[batch[j].action];
    const double e = targets[j] - q;
    sum += e * e;
  }
  return sum / static_cast<double>(batch.size());
}

/// Drift of the augmented process, [-1; f(x,a)].
inline Eigen::VectorXd augmented_drift(const SystemSpec& spec,
                                       const AugmentedState& s,
                                       const Eigen::VectorXd& u) {
  Eigen::VectorXd f(spec.state_dim + 1);
  f[0] = -1.0;
  f.tail(spec.state_dim) = spec.drift(s.x, u);
  return f;
}

/// sigma_aug sigma_aug^T for sigma_aug = [0; sigma(x,a)]; only the physical
/// block is nonzero.
inline Eigen::MatrixXd augmented_diffusion_outer(const SystemSpec& spec,
                                                 const AugmentedState& s,
                                                 const Eigen::VectorXd& u) {
  const Eigen::MatrixXd sigma = spec.diffusion(s.x, u);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(spec.state_dim + 1, spec.state_dim + 1);
  outer.bottomRightCorner(spec.state_dim, spec.state_dim) = sigma * sigma.transpose();
  return outer;
}

inline double residual_from_jet(const SystemSpec& spec, const AugmentedState& s,
                                int action, const HeadJet& jet) {
  const Eigen::VectorXd& u = spec.action_set[action];
  const Eigen::MatrixXd outer = augmented_diffusion_outer(spec, s, u);
  return jet.grad.dot(augmented_drift(spec, s, u)) +
         0.5 * outer.cwiseProduct(jet.hess).sum();
}

/// Residual of the backward equation on head `action`:
///   grad_s Q . [-1; f] + 1/2 tr(sigma_aug sigma_aug^T hess_s Q).
/// Zero for the true value function.
inline double pde_residual(const QNetwork& net, const SystemSpec& spec,
                           const AugmentedState& s, int action) {
  JetCache cache;
  jet_forward(net, s.to_vector(), cache);
  return residual_from_jet(spec, s, action, head_jet(cache, action));
}

inline double pde_loss(const QNetwork& net, const SystemSpec& spec,
                       const std::vector<AugmentedState>& points,
                       const std::vector<int>& actions) {
  if (points.empty()) throw std::invalid_argument("pde_loss: empty batch");
  double sum = 0.0;
  for (std::size_t l = 0; l < points.size(); ++l) {
    const double r = pde_residual(net, spec, points[l], actions[l]);
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

/// Boundary mismatch Q(s, a*) - l_eps(x). On the initial-time face this pins
/// the value to the payoff; on the lateral boundary l_eps vanishes and the
/// residual is Q itself.
inline double boundary_residual(const QNetwork& net, const SystemSpec& spec,
                                const AugmentedState& s, int action,
                                double eps_payoff) {
  return net.forward(s.to_vector())[action] - smoothed_payoff(spec, s.x, eps_payoff);
}

inline double boundary_loss(const QNetwork& net, const SystemSpec& spec,
                            const std::vector<AugmentedState>& points,
                            const std::vector<int>& actions, double eps_payoff) {
  if (points.empty()) throw std::invalid_argument("boundary_loss: empty batch");
  double sum = 0.0;
  for (std::size_t m = 0; m < points.size(); ++m) {
    const double r = boundary_residual(net, spec, points[m], actions[m], eps_payoff);
    sum += r * r;
  }
  return sum / static_cast<double>(points.size());
}

struct LossBatches {
  std::vector<Transition> data;
  std::vector<double> targets;
  std::vector<AugmentedState> pde_points;
  std::vector<int> pde_actions;
  std::vector<AugmentedState> boundary_points;
  std::vector<int> boundary_actions;
};

struct LossValue {
  double total = 0.0;
  double data = 0.0;
  double pde = 0.0;
  double boundary = 0.0;
};

/// Composite loss L = w_D L_D + lambda L_P + mu L_B and, when `grad` is
/// given, its exact parameter gradient. Targets and greedy actions enter as
/// constants: nothing flows back through them. Summation order is fixed, so
/// results are reproducible. A batch may be empty only if its weight is zero.
inline LossValue total_loss(const QNetwork& net, const SystemSpec& spec,
                            const LossBatches& batches, const TrainConfig& cfg,
                            GradientBuffer* grad = nullptr) {
  LossValue loss;
  ForwardCache fwd;
  JetCache jets;
  Eigen::VectorXd adjoint = Eigen::VectorXd::Zero(net.output_dim());

  if (!batches.data.empty()) {
    const double inv_n = 1.0 / static_cast<double>(batches.data.size());
    for (std::size_t j = 0; j < batches.data.size(); ++j) {
      const Transition& t = batches.data[j];
      const double q = forward_cached(net, t.s.to_vector(), fwd)[t.action];
      const double err = q - batches.targets[j];
      loss.data += err * err * inv_n;
      if (grad && cfg.data_weight != 0.0) {
        adjoint.setZero();
        adjoint[t.action] = 2.0 * err * inv_n;
        param_backward(net, fwd, adjoint, *grad, cfg.data_weight);
      }
    }
  } else if (cfg.data_weight != 0.0) {
    throw std::invalid_argument("total_loss: data batch empty but data term active");
  }

  if (!batches.pde_points.empty()) {
    const double inv_n = 1.0 / static_cast<double>(batches.pde_points.size());
    for (std::size_t l = 0; l < batches.pde_points.size(); ++l) {
      const AugmentedState& s = batches.pde_points[l];
      const int a = batches.pde_actions[l];
      jet_forward(net, s.to_vector(), jets);
      const double w = residual_from_jet(spec, s, a, head_jet(jets, a));
      loss.pde += w * w * inv_n;
      if (grad && cfg.lambda != 0.0) {
        const Eigen::VectorXd& u = spec.action_set[a];
        jet_param_backward(net, jets, a, 0.0, augmented_drift(spec, s, u),
                           0.5 * augmented_diffusion_outer(spec, s, u), *grad,
                           cfg.lambda * 2.0 * w * inv_n);
      }
    }
  } else if (cfg.lambda != 0.0) {
    throw std::invalid_argument("total_loss: PDE batch empty but lambda nonzero");
  }

  if (!batches.boundary_points.empty()) {
    const double inv_n = 1.0 / static_cast<double>(batches.boundary_points.size());
    for (std::size_t m = 0; m < batches.boundary_points.size(); ++m) {
      const AugmentedState& s = batches.boundary_points[m];
      const int a = batches.boundary_actions[m];
      const double q = forward_cached(net, s.to_vector(), fwd)[a];
      const double w = q - smoothed_payoff(spec, s.x, cfg.eps_payoff);
      loss.boundary += w * w * inv_n;
      if (grad && cfg.mu != 0.0) {
        adjoint.setZero();
        adjoint[a] = 2.0 * w * inv_n;
        param_backward(net, fwd, adjoint, *grad, cfg.mu);
      }
    }
  } else if (cfg.mu != 0.0) {
    throw std::invalid_argument("total_loss: boundary batch empty but mu nonzero");
  }

  loss.total = cfg.data_weight * loss.data + cfg.lambda * loss.pde + cfg.mu * loss.boundary;
  return loss;
}

/// Dense baseline reward r(s) + c * g(x) with g the safe-set margin
/// (1 - x2^2 on the benchmark). Used only by the shaping comparison.
inline double shaped_reward(const SystemSpec& spec, const AugmentedState& s,
                            double dt, double c) {
  return reward(spec, s, dt) + c * spec.safety_margin(s.x);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainResult {
  QNetwork net;
  TargetNetwork target;
  std::vector<EpisodeRow> metrics;
  bool aborted = false;
  std::string abort_reason;
};

inline double exploration_epsilon(const TrainConfig& cfg, int episode) {
  const double decay_span = cfg.eps_decay_fraction * cfg.episodes;
  if (decay_span <= 0.0 || episode >= decay_span) return cfg.eps_end;
  return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * episode / decay_span;
}

using CheckpointCallback = std::function<void(int episode, const QNetwork& net)>;

/// Runs the full training loop: per environment step one epsilon-greedy
/// action, replay insertion, fresh target/collocation/boundary minibatches,
/// one optimizer step on the composite loss and a soft target update.
/// `initial` (normally null) seeds the network, e.g. to resume a run.
inline TrainResult train(const SystemSpec& spec, const TrainConfig& cfg,
                         const CheckpointCallback& on_checkpoint = {},
                         const QNetwork* initial = nullptr) {
  cfg.validate();
  Rng rng(cfg.seed);

  TrainResult result;
  result.net = initial ? *initial : QNetwork(cfg.layer_sizes(spec), rng);
  result.target = result.net;
  if (cfg.episodes == 0) return result;

  ReplayMemory replay(cfg.replay_capacity);
  AdamOptimizer adam(result.net);
  GradientBuffer grad = result.net.make_gradient();
  LossBatches batches;
  long cum_unsafe = 0;
  long env_steps = 0;

  auto greedy_actions = [&](const std::vector<AugmentedState>& points) {
    std::vector<int> actions;
    actions.reserve(points.size());
    for (const auto& s : points) actions.push_back(result.net.greedy_action(s.to_vector()));
    return actions;
  };

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const auto t_start = std::chrono::steady_clock::now();
    const double epsilon = exploration_epsilon(cfg, ep);
    AugmentedState s = sample_initial(spec, cfg.tau_d, rng);

    EpisodeRow row;
    row.episode = ep;
    row.epsilon = epsilon;
    LossValue sum_loss;
    int loss_steps = 0;

    while (!is_absorbing(spec, s)) {
      double r = 0.0;
      switch (cfg.reward_mode) {
        case RewardMode::binary: r = reward(spec, s, cfg.dt); break;
        case RewardMode::smoothed: r = smoothed_reward(spec, s, cfg.dt, cfg.eps_payoff); break;
        case RewardMode::shaped: r = shaped_reward(spec, s, cfg.dt, cfg.shaping_coeff); break;
      }
      row.ret += reward(spec, s, cfg.dt);

      int a;
      if (rng.uniform() < epsilon) {
        a = rng.uniform_int(spec.action_count());
      } else {
        a = result.net.greedy_action(s.to_vector());
      }

      const Eigen::VectorXd dW = rng.normal_vector(spec.state_dim, std::sqrt(cfg.dt));
      AugmentedState s_next = step(spec, s, spec.action_set[a], cfg.dt, dW);
      replay.push({s, a, r, s_next, is_absorbing(spec, s_next)});

      // physics batches exist only when their loss term does
      if (env_steps % cfg.pde_update_every == 0) {
        if (cfg.lambda != 0.0) {
          batches.pde_points = sample_pde_points(spec, cfg.tau, cfg.batch_pde, rng);
        }
        if (cfg.mu != 0.0) {
          batches.boundary_points = sample_boundary_points(spec, cfg.tau, cfg.batch_boundary, rng);
        }
      }
      batches.data = replay.sample_batch(cfg.batch_data, rng);
      batches.targets = td_targets(batches.data, result.target);
      // greedy actions are re-taken from the current parameters every step
      batches.pde_actions = greedy_actions(batches.pde_points);
      batches.boundary_actions = greedy_actions(batches.boundary_points);

      grad.set_zero();
      const LossValue loss = total_loss(result.net, spec, batches, cfg, &grad);
      if (!std::isfinite(loss.total)) {
        std::ostringstream why;
        why << "non-finite loss at episode " << ep << " step " << row.steps
            << ": data=" << loss.data << " pde=" << loss.pde
            << " boundary=" << loss.boundary
            << " (batch sizes " << batches.data.size() << "/"
            << batches.pde_points.size() << "/" << batches.boundary_points.size() << ")";
        result.aborted = true;
        result.abort_reason = why.str();
        result.metrics.push_back(row);
        return result;
      }
      if (cfg.use_sgd) {
        sgd_step(result.net, grad, cfg.learning_rate);
      } else {
        adam.step(result.net, grad, cfg.learning_rate);
      }
      soft_update(result.target, result.net, cfg.target_eta);

      sum_loss.total += loss.total;
      sum_loss.data += loss.data;
      sum_loss.pde += loss.pde;
      sum_loss.boundary += loss.boundary;
      ++loss_steps;
      ++env_steps;
      ++row.steps;
      s = s_next;
    }

    if (!spec.safe_membership(s.x) && s.h >= -kHorizonTol) ++cum_unsafe;
    row.cum_unsafe_events = cum_unsafe;
    if (loss_steps > 0) {
      row.loss_total = sum_loss.total / loss_steps;
      row.loss_data = sum_loss.data / loss_steps;
      row.loss_pde = sum_loss.pde / loss_steps;
      row.loss_boundary = sum_loss.boundary / loss_steps;
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    result.metrics.push_back(row);
    if (on_checkpoint && cfg.checkpoint_every > 0 &&
        (ep + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(ep, result.net);
    }
  }
  return result;
}

}  // namespace pirl
