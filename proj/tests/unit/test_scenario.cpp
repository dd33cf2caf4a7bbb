#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "eot/errors.hpp"
#include "eot/scenario.hpp"

namespace eot {
namespace {

/// Upper tail of the chi-square distribution by Simpson integration of its
/// density.
double chi_square_upper_tail(double x, int dof) {
  const double k = dof / 2.0;
  const double log_norm = -k * std::log(2.0) - std::lgamma(k);
  auto pdf = [&](double t) { return t <= 0.0 ? 0.0 : std::exp(log_norm + (k - 1.0) * std::log(t) - 0.5 * t); };
  const double hi = x + 400.0;
  const int n = 40'000;
  const double h = (hi - x) / n;
  double s = pdf(x) + pdf(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(x + i * h);
  return s * h / 3.0;
}

double poisson_pmf(int k, double mu) { return std::exp(k * std::log(mu) - mu - std::lgamma(k + 1.0)); }

TEST(ChiSquareTail, KnownQuantiles) {
  // 95th percentiles of chi-square with 1 and 10 degrees of freedom
  EXPECT_NEAR(chi_square_upper_tail(3.841458820694124, 1), 0.05, 1e-6);
  EXPECT_NEAR(chi_square_upper_tail(18.307038053275146, 10), 0.05, 1e-6);
}

TEST(Truth, StraightLinesWithoutProcessNoise) {
  auto cfg = desk_scenario<2>();
  cfg.sigma_c = 0.0;
  cfg.n_steps = 30;
  Rng rng(1);
  const auto truth = generate_truth<2>(cfg, rng);
  ASSERT_EQ(truth.size(), 30u);
  for (int i = 0; i < 3; ++i) {
    const auto& o0 = truth[0].objects[i];
    EXPECT_NEAR(o0.x.p.norm(), 75.0, 1e-12);
    EXPECT_NEAR(o0.x.v.norm(), 10.0, 1e-12);
    for (int n = 1; n < 30; ++n) {
      const auto& o = truth[n].objects[i];
      EXPECT_NEAR((o.x.p - (o0.x.p + n * 0.2 * o0.x.v)).norm(), 0.0, 1e-9);
      EXPECT_NEAR((o.x.v - o0.x.v).norm(), 0.0, 1e-12);
      EXPECT_EQ(o.E, o0.E);
    }
  }
}

TEST(Truth, PaperScheduleLifetimes) {
  const auto cfg = paper_scenario<2>();
  Rng rng(2);
  const auto truth = generate_truth<2>(cfg, rng);
  ASSERT_EQ(truth.size(), 100u);
  EXPECT_EQ(truth[2].alive().size(), 0u);
  EXPECT_EQ(truth[3].alive().size(), 2u);
  EXPECT_EQ(truth[20].alive().size(), 10u);
  EXPECT_EQ(truth[82].alive().size(), 10u);
  EXPECT_EQ(truth[83].alive().size(), 8u);
  EXPECT_EQ(truth[95].alive().size(), 0u);
}

TEST(Truth, ObjectsBornInsideRegion) {
  const auto cfg = paper_scenario<2>();
  Rng rng(3);
  const auto truth = generate_truth<2>(cfg, rng);
  for (int i = 0; i < cfg.n_objects; ++i)
    EXPECT_TRUE(cfg.roi.contains(truth[cfg.birth_times[i]].objects[i].x.p)) << "object " << i;
}

TEST(Truth, ConfigValidation) {
  auto cfg = desk_scenario<2>();
  cfg.birth_times = {3, 6};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = desk_scenario<2>();
  cfg.death_times = {83, 6, 89};
  cfg.birth_times = {3, 6, 9};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = desk_scenario<2>();
  cfg.extent_dof = 3.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = desk_scenario<2>();
  cfg.n_objects = 0;
  cfg.birth_times.clear();
  cfg.death_times.clear();
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Measurements, NothingGeneratedWithZeroRates) {
  const auto cfg = paper_scenario<2>();
  MeasurementModel<2> model;
  model.rate.value = 0.0;
  model.mu_fa = 0.0;
  const auto sim = simulate<2>(cfg, model, 4);
  for (const auto& z : sim.measurements) EXPECT_TRUE(z.empty());
}

TEST(Measurements, MeanCountMatchesRates) {
  const auto cfg = paper_scenario<2>();
  Rng rng(5);
  const auto truth = generate_truth<2>(cfg, rng);
  MeasurementModel<2> model;
  const double expected = 10 * 8.0 + 10.0;
  ASSERT_EQ(expected, 90.0);
  const int frames = 10'000;
  double total = 0.0;
  for (int i = 0; i < frames; ++i) total += static_cast<double>(generate_measurements<2>(truth[20], model, rng).size());
  EXPECT_NEAR(total / frames / expected, 1.0, 0.01);
}

TEST(Measurements, ClutterCountIsPoisson) {
  MeasurementModel<2> model;
  TruthFrame<2> empty;
  Rng rng(6);
  const int frames = 4000;
  // bins: <= 4, 5 .. 15, >= 16
  std::vector<double> observed(13, 0.0);
  for (int i = 0; i < frames; ++i) {
    const int c = static_cast<int>(generate_measurements<2>(empty, model, rng).size());
    observed[std::clamp(c - 4, 0, 12)] += 1.0;
  }
  std::vector<double> prob(13, 0.0);
  for (int k = 0; k <= 4; ++k) prob[0] += poisson_pmf(k, 10.0);
  for (int k = 5; k <= 15; ++k) prob[k - 4] = poisson_pmf(k, 10.0);
  double head = 0.0;
  for (int b = 0; b < 12; ++b) head += prob[b];
  prob[12] = 1.0 - head;
  double chi2 = 0.0;
  for (int b = 0; b < 13; ++b) {
    const double e = frames * prob[b];
    chi2 += (observed[b] - e) * (observed[b] - e) / e;
  }
  EXPECT_GT(chi_square_upper_tail(chi2, 12), 0.01) << "chi2 = " << chi2;
}

TEST(Measurements, ClutterUniformOverRegion) {
  MeasurementModel<2> model;
  model.mu_fa = 1000.0;
  TruthFrame<2> empty;
  Rng rng(7);
  const auto z = generate_measurements<2>(empty, model, rng);
  Vec<2> mean = Vec<2>::Zero();
  for (const auto& p : z) {
    EXPECT_TRUE(model.roi.contains(p));
    mean += p;
  }
  mean /= static_cast<double>(z.size());
  // uniform on [-150, 150] has standard deviation 300 / sqrt(12)
  EXPECT_LT(mean.norm(), 4.0 * 300.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(z.size())));
}

TEST(Measurements, UniformShapesStayNearSupport) {
  for (auto shape : {ShapeKind::UniformEllipse, ShapeKind::UniformCube}) {
    Rng rng(8);
    const Mat<2> E = Vec<2>(4.0, 2.0).asDiagonal();
    for (int i = 0; i < 2000; ++i) {
      const Vec<2> v = sample_shape_offset<2>(E, shape, rng);
      if (shape == ShapeKind::UniformCube) {
        EXPECT_LE(std::abs(v(0)), 2.0);
        EXPECT_LE(std::abs(v(1)), 1.0);
      } else {
        EXPECT_LE(v(0) * v(0) / 16.0 + v(1) * v(1) / 4.0, 1.0 + 1e-12);
      }
    }
  }
}

TEST(Simulation, Deterministic) {
  const auto cfg = desk_scenario<2>();
  MeasurementModel<2> model;
  const auto a = simulate<2>(cfg, model, 9);
  const auto b = simulate<2>(cfg, model, 9);
  const auto c = simulate<2>(cfg, model, 10);
  ASSERT_EQ(a.measurements.size(), b.measurements.size());
  bool differs = false;
  for (std::size_t n = 0; n < a.measurements.size(); ++n) {
    ASSERT_EQ(a.measurements[n].size(), b.measurements[n].size());
    for (std::size_t i = 0; i < a.measurements[n].size(); ++i) EXPECT_EQ(a.measurements[n][i], b.measurements[n][i]);
    if (a.measurements[n].size() != c.measurements[n].size()) differs = true;
  }
  EXPECT_TRUE(differs);
}

}  // namespace
}  // namespace eot
