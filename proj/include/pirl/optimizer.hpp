#pragma once

#include <cmath>

#include "pirl/network.hpp"

namespace pirl {

/// Adaptive moment estimation with the usual defaults. A plain SGD step is
/// available for comparison runs.
class AdamOptimizer {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamOptimizer(const QNetwork& net)
      : m_(net.make_gradient()), v_(net.make_gradient()) {}

  void step(QNetwork& net, const GradientBuffer& grad, double lr) {
    ++t_;
    const double correction1 = 1.0 - std::pow(beta1, t_);
    const double correction2 = 1.0 - std::pow(beta2, t_);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      m_.w[l] = beta1 * m_.w[l] + (1.0 - beta1) * grad.w[l];
      v_.w[l] = beta2 * v_.w[l] + (1.0 - beta2) * grad.w[l].array().square().matrix();
      net.weights[l].array() -=
          lr * (m_.w[l].array() / correction1) /
          ((v_.w[l].array() / correction2).sqrt() + eps);
      m_.b[l] = beta1 * m_.b[l] + (1.0 - beta1) * grad.b[l];
      v_.b[l] = beta2 * v_.b[l] + (1.0 - beta2) * grad.b[l].array().square().matrix();
      net.biases[l].array() -=
          lr * (m_.b[l].array() / correction1) /
          ((v_.b[l].array() / correction2).sqrt() + eps);
    }
  }

 private:
  GradientBuffer m_;
  GradientBuffer v_;
  long t_ = 0;
};

inline void sgd_step(QNetwork& net, const GradientBuffer& grad, double lr) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    net.weights[l] -= lr * grad.w[l];
    net.biases[l] -= lr * grad.b[l];
  }
}

}  // namespace pirl
