#include "pirl/sampling.hpp"

#include <gtest/gtest.h>

#include <set>

#include "pirl/replay.hpp"
#include "test_util.hpp"

namespace pirl {
namespace {

TEST(SampleInitial, HorizonIsExactlyTauD) {
  const SystemSpec spec = benchmark_system();
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const AugmentedState s = sample_initial(spec, 2.0, rng);
    ASSERT_EQ(s.h, 2.0);
    ASSERT_TRUE(spec.init_domain.contains(s.x));
  }
}

TEST(SampleInitial, FirstCoordinateIsUniform) {
  const SystemSpec spec = benchmark_system();
  Rng rng(2);
  std::vector<double> x1;
  for (int i = 0; i < 10000; ++i) x1.push_back(sample_initial(spec, 2.0, rng).x[0]);
  const double ks = test::ks_statistic(
      x1, [](double v) { return (v + 1.5) / 3.0; });
  EXPECT_LT(ks, 0.02);
}

TEST(SampleInitial, DegenerateDomainIsAPoint) {
  SystemSpec spec = benchmark_system();
  spec.init_domain = {Eigen::Vector2d(0.25, -0.5), Eigen::Vector2d(0.25, -0.5)};
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const AugmentedState s = sample_initial(spec, 1.0, rng);
    ASSERT_EQ(s.x[0], 0.25);
    ASSERT_EQ(s.x[1], -0.5);
  }
}

TEST(SamplePdePoints, SupportAndMean) {
  const SystemSpec spec = benchmark_system();
  Rng rng(4);
  const auto points = sample_pde_points(spec, 2.0, 10000, rng);
  ASSERT_EQ(points.size(), 10000u);
  double mean_h = 0.0;
  for (const auto& s : points) {
    ASSERT_GE(s.h, 0.0);
    ASSERT_LE(s.h, 2.0);
    ASSERT_TRUE(spec.pde_domain.contains(s.x));
    mean_h += s.h;
  }
  mean_h /= 10000.0;
  EXPECT_NEAR(mean_h, 1.0, 0.02);

  EXPECT_TRUE(sample_pde_points(spec, 2.0, 0, rng).empty());
}

TEST(SampleBoundaryPoints, SupportAndFaceSplit) {
  const SystemSpec spec = benchmark_system();
  Rng rng(5);
  const auto points = sample_boundary_points(spec, 2.0, 10000, rng);
  int initial_face = 0;
  for (const auto& s : points) {
    const bool on_initial = s.h == 0.0 && spec.pde_domain.contains(s.x);
    const bool on_lateral = spec.unsafe_distance(s.x) == 0.0;
    ASSERT_TRUE(on_initial || on_lateral);
    if (on_initial) {
      ++initial_face;
    } else {
      ASSERT_EQ(std::abs(s.x[1]), 1.0);
      ASSERT_GE(s.h, 0.0);
      ASSERT_LE(s.h, 2.0);
    }
  }
  EXPECT_NEAR(initial_face / 10000.0, 0.5, 0.02);
}

TEST(ReplayMemory, EvictsOldestFirst) {
  ReplayMemory memory(3);
  for (int i = 0; i < 4; ++i) {
    Transition t;
    t.action = i;
    t.s = {1.0, Eigen::Vector2d::Zero()};
    t.s_next = t.s;
    memory.push(t);
    ASSERT_LE(memory.size(), 3u);
  }
  ASSERT_EQ(memory.size(), 3u);
  EXPECT_EQ(memory[0].action, 1);
  EXPECT_EQ(memory[1].action, 2);
  EXPECT_EQ(memory[2].action, 3);
}

TEST(ReplayMemory, SamplesUniformlyWithReplacement) {
  ReplayMemory memory(8);
  for (int i = 0; i < 3; ++i) {
    Transition t;
    t.action = i;
    t.s = {1.0, Eigen::Vector2d::Zero()};
    t.s_next = t.s;
    memory.push(t);
  }
  Rng rng(6);
  std::set<int> seen;
  const auto batch = memory.sample_batch(64, rng);
  ASSERT_EQ(batch.size(), 64u);  // larger than contents, so with replacement
  for (const auto& t : batch) seen.insert(t.action);
  EXPECT_EQ(seen.size(), 3u);

  ReplayMemory empty(4);
  EXPECT_THROW(empty.sample(rng), std::logic_error);
  EXPECT_THROW(ReplayMemory(0), std::invalid_argument);
}

}  // namespace
}  // namespace pirl
