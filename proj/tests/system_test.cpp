#include "pirl/system.hpp"

#include <gtest/gtest.h>

#include "pirl/rng.hpp"

namespace pirl {
namespace {

TEST(EulerMaruyamaStep, HandComputedDriftOnly) {
  const SystemSpec spec = benchmark_system();
  const Eigen::Vector2d x(1.0, 0.0);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd x1 =
      euler_maruyama_step(spec, x, u, 0.1, Eigen::Vector2d::Zero());
  EXPECT_NEAR(x1[0], 0.9, 1e-15);
  EXPECT_NEAR(x1[1], 0.1, 1e-15);
}

TEST(EulerMaruyamaStep, EquilibriumIsFixed) {
  const SystemSpec spec = benchmark_system();
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd x1 = euler_maruyama_step(
      spec, Eigen::Vector2d::Zero(), u, 0.37, Eigen::Vector2d::Zero());
  EXPECT_EQ(x1[0], 0.0);
  EXPECT_EQ(x1[1], 0.0);
}

TEST(EulerMaruyamaStep, PureNoiseScalesByDiffusion) {
  const SystemSpec spec = benchmark_system();
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd x1 = euler_maruyama_step(
      spec, Eigen::Vector2d::Zero(), u, 0.1, Eigen::Vector2d(0.1, -0.2));
  EXPECT_NEAR(x1[0], 0.02, 1e-15);
  EXPECT_NEAR(x1[1], -0.04, 1e-15);
}

TEST(EulerMaruyamaStep, RejectsMismatchedNoise) {
  const SystemSpec spec = benchmark_system();
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(euler_maruyama_step(spec, Eigen::Vector2d::Zero(), u, 0.1,
                                   Eigen::Vector3d::Zero()),
               std::invalid_argument);
  EXPECT_THROW(euler_maruyama_step(spec, Eigen::Vector2d::Zero(), u, 0.0,
                                   Eigen::Vector2d::Zero()),
               std::invalid_argument);
}

TEST(EulerMaruyamaStep, SmallStepStaysNearby) {
  const SystemSpec spec = benchmark_system();
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd x = spec.init_domain.sample(rng);
    const Eigen::VectorXd& u = spec.action_set[rng.uniform_int(spec.action_count())];
    for (double dt : {1e-2, 1e-4, 1e-6}) {
      const Eigen::VectorXd dW = rng.normal_vector(2, std::sqrt(dt));
      const Eigen::VectorXd x1 = euler_maruyama_step(spec, x, u, dt, dW);
      const double bound =
          spec.drift(x, u).norm() * dt + (spec.diffusion(x, u) * dW).norm();
      EXPECT_LE((x1 - x).norm(), bound + 1e-12);
    }
  }
}

TEST(SmoothedPayoff, BenchmarkExamples) {
  const SystemSpec spec = benchmark_system();
  EXPECT_DOUBLE_EQ(smoothed_payoff(spec, Eigen::Vector2d(0.3, 0.0), 0.1), 1.0);
  EXPECT_DOUBLE_EQ(smoothed_payoff(spec, Eigen::Vector2d(0.0, 1.0), 0.1), 0.0);
  EXPECT_NEAR(smoothed_payoff(spec, Eigen::Vector2d(0.0, 0.95), 0.1), 0.5, 1e-12);
}

TEST(SmoothedPayoff, SharpensToIndicator) {
  const SystemSpec spec = benchmark_system();
  const Eigen::Vector2d interior(0.2, 0.5);
  const Eigen::Vector2d exterior(0.2, 1.3);
  for (double eps : {0.1, 0.01, 0.001}) {
    EXPECT_DOUBLE_EQ(smoothed_payoff(spec, interior, eps), 1.0);
    EXPECT_DOUBLE_EQ(smoothed_payoff(spec, exterior, eps), 0.0);
  }
  // inside the ramp the value interpolates
  EXPECT_LT(smoothed_payoff(spec, Eigen::Vector2d(0.0, 0.97), 0.1), 1.0);
  EXPECT_GT(smoothed_payoff(spec, Eigen::Vector2d(0.0, 0.97), 0.1), 0.0);
}

TEST(SmoothedPayoff, BoundedOnRandomPoints) {
  const SystemSpec spec = benchmark_system();
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector2d x(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
    const double v = smoothed_payoff(spec, x, 0.1);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  EXPECT_THROW(smoothed_payoff(spec, Eigen::Vector2d::Zero(), 0.0),
               std::invalid_argument);
}

TEST(BenchmarkSystem, EquilibriumAndGeometry) {
  const SystemSpec spec = benchmark_system();
  ASSERT_EQ(spec.state_dim, 2);
  ASSERT_EQ(spec.action_count(), 5);
  EXPECT_EQ(spec.drift(Eigen::Vector2d::Zero(), Eigen::VectorXd::Zero(1)).norm(), 0.0);

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d x(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
    EXPECT_DOUBLE_EQ(spec.unsafe_distance(x), std::max(0.0, 1.0 - std::abs(x[1])));
    EXPECT_EQ(spec.safe_membership(x), 1.0 - x[1] * x[1] > 0.0);
    // zero distance exactly on and beyond the boundary
    if (!spec.safe_membership(x)) EXPECT_DOUBLE_EQ(spec.unsafe_distance(x), 0.0);
  }

  // the collocation domain is strictly safe, the boundary faces are not
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(spec.safe_membership(spec.pde_domain.sample(rng)));
    for (const Box& face : spec.boundary_domain) {
      EXPECT_DOUBLE_EQ(spec.unsafe_distance(face.sample(rng)), 0.0);
    }
  }

  for (const auto& u : spec.action_set) {
    const Eigen::MatrixXd sigma = spec.diffusion(Eigen::Vector2d(0.3, -0.2), u);
    EXPECT_EQ(sigma.rows(), 2);
    EXPECT_EQ(sigma.cols(), 2);
  }
}

TEST(Box, DegenerateFaceSamplesExactly) {
  Box face{Eigen::Vector2d(-1.5, 1.0), Eigen::Vector2d(1.5, 1.0)};
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = face.sample(rng);
    EXPECT_EQ(x[1], 1.0);
    EXPECT_GE(x[0], -1.5);
    EXPECT_LE(x[0], 1.5);
  }
  EXPECT_DOUBLE_EQ(face.measure(), 3.0);
}

}  // namespace
}  // namespace pirl
