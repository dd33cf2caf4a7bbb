#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "eot/scenario.hpp"
#include "eot/tracker.hpp"

namespace eot {
namespace {

struct DeskRun {
  Simulation<2> sim;
  Models<2> models;
  TrackerConfig config;
};

DeskRun desk(int steps, int J = 500) {
  DeskRun r;
  auto scenario = desk_scenario<2>();
  scenario.n_steps = steps;
  r.sim = simulate<2>(scenario, r.models.measurement, 1);
  r.config.spa.J = J;
  r.config.jitter_std = 0.3;
  r.config.velocity_jitter_std = 0.7;
  return r;
}

TEST(Tracker, NoFramesNoResults) {
  Models<2> models;
  EXPECT_TRUE(run<2>({}, models, TrackerConfig{}, 1).empty());
}

TEST(Tracker, EmptyFramesKeepStateEmpty) {
  Models<2> models;
  Tracker<2> tracker(models, TrackerConfig{}, 1);
  for (int t = 0; t < 3; ++t) {
    const auto r = tracker.step(t, {});
    EXPECT_TRUE(r.detections.empty());
    EXPECT_TRUE(r.existence.empty());
    EXPECT_EQ(r.messages, 0);
  }
}

TEST(Tracker, MeasurementsOutsideRegionIgnored) {
  Models<2> models;
  Tracker<2> tracker(models, TrackerConfig{}, 1);
  const auto r = tracker.step(0, {Vec<2>(500.0, 0.0), Vec<2>(0.0, -151.0)});
  EXPECT_EQ(r.n_measurements, 0);
  EXPECT_TRUE(r.existence.empty());
}

TEST(Tracker, DetectsFirstObjectSoonAfterBirth) {
  auto d = desk(12);
  const auto results = run<2>(d.sim.measurements, d.models, d.config, 7, &d.sim.truth);
  int first = -1;
  for (const auto& r : results) {
    bool hit = false;
    for (const auto& e : r.detections)
      for (const auto& o : d.sim.truth[r.step].alive()) hit = hit || (e.x.p - o.x.p).norm() < 5.0;
    if (hit) {
      first = r.step;
      break;
    }
  }
  ASSERT_GE(first, 3) << "no object is alive before step 3";
  EXPECT_LE(first, 6);
  ASSERT_TRUE(results.back().ospa.has_value());
  ASSERT_TRUE(results.back().gospa.has_value());
  EXPECT_LT(results.back().ospa->total, 20.0);
}

TEST(Tracker, StepInvariants) {
  auto d = desk(10, 300);
  Tracker<2> tracker(d.models, d.config, 3);
  std::size_t previous = 0;
  for (int t = 0; t < 10; ++t) {
    const auto r = tracker.step(t, d.sim.measurements[t], &d.sim.truth[t]);
    const long long M = r.n_measurements, K = static_cast<long long>(previous);
    EXPECT_EQ(r.messages_per_iteration, K * M + M * (M + 1) / 2);
    EXPECT_EQ(r.messages, 3 * r.messages_per_iteration);
    std::set<std::pair<std::int64_t, std::int64_t>> labels;
    for (const auto& [label, pe] : r.existence) {
      EXPECT_TRUE(labels.insert({label.step, label.index}).second);
      EXPECT_LE(label.step, t);
      EXPECT_GE(pe, d.config.spa.P_pr);
      EXPECT_LE(pe, 1.0 + 1e-12);
    }
    for (const auto& e : r.detections) EXPECT_GT(e.existence, d.config.spa.P_th);
    for (const auto& b : tracker.state()) EXPECT_EQ(static_cast<int>(b.particles.size()), d.config.spa.J);
    previous = r.existence.size();
  }
}

TEST(Tracker, CapOnPotentialObjects) {
  auto d = desk(4, 100);
  d.config.max_pos = 5;
  d.config.spa.P_pr = 1e-12;
  Tracker<2> tracker(d.models, d.config, 3);
  for (int t = 0; t < 4; ++t) EXPECT_LE(tracker.step(t, d.sim.measurements[t]).existence.size(), 5u);
}

TEST(Tracker, Reproducible) {
  auto d = desk(6, 200);
  const auto a = run<2>(d.sim.measurements, d.models, d.config, 5);
  const auto b = run<2>(d.sim.measurements, d.models, d.config, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].existence.size(), b[i].existence.size());
    for (std::size_t k = 0; k < a[i].existence.size(); ++k) EXPECT_EQ(a[i].existence[k].second, b[i].existence[k].second);
  }
}

}  // namespace
}  // namespace eot
