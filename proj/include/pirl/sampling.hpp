#pragma once

#include <vector>

#include "pirl/augmented.hpp"
#include "pirl/rng.hpp"
#include "pirl/system.hpp"

namespace pirl {

/// Episode-start distribution: horizon fixed at tau_d, state uniform on the
/// init domain.
inline AugmentedState sample_initial(const SystemSpec& spec, double tau_d, Rng& rng) {
  return {tau_d, spec.init_domain.sample(rng)};
}

/// Interior collocation points: horizon uniform on [0, tau], state uniform on
/// the PDE domain.
inline std::vector<AugmentedState> sample_pde_points(const SystemSpec& spec,
                                                     double tau, int batch,
                                                     Rng& rng) {
  std::vector<AugmentedState> points;
  points.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    points.push_back({rng.uniform(0.0, tau), spec.pde_domain.sample(rng)});
  }
  return points;
}

/// Boundary points, split evenly between the initial-time face (h = 0, state
/// in the PDE domain) and the lateral boundary (h uniform on [0, tau], state
/// on a boundary face, faces weighted by their measure).
inline std::vector<AugmentedState> sample_boundary_points(const SystemSpec& spec,
                                                          double tau, int batch,
                                                          Rng& rng) {
  double total_measure = 0.0;
  for (const auto& face : spec.boundary_domain) total_measure += face.measure();

  std::vector<AugmentedState> points;
  points.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    if (rng.uniform() < 0.5) {
      points.push_back({0.0, spec.pde_domain.sample(rng)});
    } else {
      double pick = rng.uniform(0.0, total_measure);
      std::size_t f = 0;
      for (; f + 1 < spec.boundary_domain.size(); ++f) {
        pick -= spec.boundary_domain[f].measure();
        if (pick < 0.0) break;
      }
      points.push_back({rng.uniform(0.0, tau), spec.boundary_domain[f].sample(rng)});
    }
  }
  return points;
}

}  // namespace pirl
