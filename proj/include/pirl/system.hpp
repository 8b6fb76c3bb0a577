#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pirl/rng.hpp"

namespace pirl {

/// Axis-aligned sampling region. A coordinate with lo == hi is a face: it
/// contributes the fixed value when sampling and is skipped in measure().
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    }
    return true;
  }

  double measure() const {
    double m = 1.0;
    for (int i = 0; i < dim(); ++i) {
      if (hi[i] > lo[i]) m *= hi[i] - lo[i];
    }
    return m;
  }

  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::VectorXd x(dim());
    for (int i = 0; i < dim(); ++i) {
      x[i] = hi[i] > lo[i] ? rng.uniform(lo[i], hi[i]) : lo[i];
    }
    return x;
  }
};

using DriftFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using DiffusionFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using StatePredicate = std::function<bool(const Eigen::VectorXd&)>;
using StateScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// A controlled diffusion dX = f(X,U)dt + sigma(X,U)dW together with the
/// safe-set geometry and the sampling regions used in training.
struct SystemSpec {
  int state_dim = 0;
  std::vector<Eigen::VectorXd> action_set;
  DriftFn drift;
  DiffusionFn diffusion;
  StatePredicate safe_membership;   // x in C
  StateScalarFn unsafe_distance;    // dist(x, complement of C), 0 outside C
  StateScalarFn safety_margin;      // g with C = {g > 0}; used by reward shaping
  Box init_domain;                  // episode starts
  Box pde_domain;                   // interior collocation, subset of C
  std::vector<Box> boundary_domain; // faces of the lateral boundary

  int action_count() const { return static_cast<int>(action_set.size()); }
};

/// One explicit Euler-Maruyama step x' = x + f(x,u) dt + sigma(x,u) dW.
/// The caller draws dW ~ N(0, dt I).
inline Eigen::VectorXd euler_maruyama_step(const SystemSpec& spec,
                                           const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& u, double dt,
                                           const Eigen::VectorXd& dW) {
  if (dt <= 0.0) throw std::invalid_argument("euler_maruyama_step: dt must be positive");
  const Eigen::MatrixXd sigma = spec.diffusion(x, u);
  if (sigma.cols() != dW.size()) {
    throw std::invalid_argument(
        "euler_maruyama_step: noise dimension does not match diffusion columns");
  }
  return x + spec.drift(x, u) * dt + sigma * dW;
}

/// Lipschitz payoff: 1 on the eps-shrunk safe set, linear ramp to 0 at the
/// safe-set boundary, 0 outside. Equals clamp(dist(x, C^c)/eps, 0, 1).
inline double smoothed_payoff(const SystemSpec& spec, const Eigen::VectorXd& x,
                              double eps) {
  if (eps <= 0.0) throw std::invalid_argument("smoothed_payoff: eps must be positive");
  return std::clamp(spec.unsafe_distance(x) / eps, 0.0, 1.0);
}

/// Two-dimensional benchmark with an unstable equilibrium at the origin:
///   f(x,u) = [-x1^3 - x2, x1 + x2 + u],  sigma = 0.2 I,  C = {1 - x2^2 > 0},
/// five evenly spaced control levels on [-1, 1].
inline SystemSpec benchmark_system() {
  SystemSpec spec;
  spec.state_dim = 2;
  for (double u : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    spec.action_set.push_back(Eigen::VectorXd::Constant(1, u));
  }
  spec.drift = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd f(2);
    f[0] = -x[0] * x[0] * x[0] - x[1];
    f[1] = x[0] + x[1] + u[0];
    return f;
  };
  spec.diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(0.2 * Eigen::MatrixXd::Identity(2, 2));
  };
  spec.safe_membership = [](const Eigen::VectorXd& x) {
    return 1.0 - x[1] * x[1] > 0.0;
  };
  spec.unsafe_distance = [](const Eigen::VectorXd& x) {
    return std::max(0.0, 1.0 - std::abs(x[1]));
  };
  spec.safety_margin = [](const Eigen::VectorXd& x) { return 1.0 - x[1] * x[1]; };
  spec.init_domain = {Eigen::Vector2d(-1.5, -1.0), Eigen::Vector2d(1.5, 1.0)};
  spec.pde_domain = {Eigen::Vector2d(-1.5, -0.9), Eigen::Vector2d(1.5, 0.9)};
  spec.boundary_domain = {
      {Eigen::Vector2d(-1.5, 1.0), Eigen::Vector2d(1.5, 1.0)},
      {Eigen::Vector2d(-1.5, -1.0), Eigen::Vector2d(1.5, -1.0)},
  };
  return spec;
}

}  // namespace pirl
