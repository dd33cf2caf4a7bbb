#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "eot/errors.hpp"
#include "eot/oracle.hpp"
#include "eot/validation.hpp"

namespace eot {
namespace {

/// Bivariate normal density written out for a 2x2 covariance.
double normal2(const Vec<2>& r, const Mat<2>& S) {
  const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
  const double q = (S(1, 1) * r(0) * r(0) - 2.0 * S(0, 1) * r(0) * r(1) + S(0, 0) * r(1) * r(1)) / det;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

Models<2> gaussian_models() {
  auto m = oracle_models();
  m.measurement.shape = ShapeKind::GaussianExtent;
  m.measurement.sigma_u = Mat<2>::Identity();
  return m;
}

TEST(Enumeration, SingleNewPoMatchesHandComputation) {
  DiscretizedInstance<2> inst;
  inst.models = gaussian_models();
  inst.z = {Vec<2>(1.0, -0.5)};
  Particle<2> p;
  p.x.p = Vec<2>(0.0, 0.0);
  p.E = Vec<2>(2.0, 1.0).asDiagonal();
  p.w = 1e-4;
  inst.fresh = {{p}};
  const auto r = enumerate_posterior<2>(inst);
  // rate 3, clutter density 2 / 100^2, covariance E^2 + I
  const double f = normal2(inst.z[0], Vec<2>(5.0, 2.0).asDiagonal());
  const double ratio = p.w * 3.0 * f / (2.0 / 1e4);
  EXPECT_NEAR(r.new_existence[0], ratio / (1.0 + ratio), 1e-12);
  EXPECT_NEAR(r.assoc[0][1], ratio / (1.0 + ratio), 1e-12);
  EXPECT_NEAR(r.assoc[0][0], 1.0 / (1.0 + ratio), 1e-12);
}

TEST(Enumeration, LegacyWithoutMeasurements) {
  DiscretizedInstance<2> inst;
  inst.models = gaussian_models();
  Particle<2> p;
  p.w = 0.7;
  inst.legacy = {{p}};
  const auto r = enumerate_posterior<2>(inst);
  const double alive = 0.99 * std::exp(-3.0) * 0.7;
  const double absent = 0.3 + 0.01 * 0.7;
  EXPECT_NEAR(r.legacy_existence[0], alive / (alive + absent), 1e-12);
}

TEST(Enumeration, MirrorSymmetricLegacyPosAreEquallyLikely) {
  Rng rng(11);
  DiscretizedInstance<2> inst;
  inst.models = gaussian_models();
  inst.z = {Vec<2>(0.0, 0.0)};
  auto left = legacy_support(Vec<2>(-3.0, 0.0), 1.0, 0.8, 5, rng);
  auto right = left;
  for (auto& p : right) p.x.p(0) = -p.x.p(0);
  inst.legacy = {left, right};
  inst.fresh = {{left[0]}};
  inst.fresh[0][0].w = 1e-3;
  const auto r = enumerate_posterior<2>(inst);
  EXPECT_NEAR(r.assoc[0][1], r.assoc[0][2], 1e-14);
  EXPECT_NEAR(r.legacy_existence[0], r.legacy_existence[1], 1e-14);
}

TEST(Enumeration, OverwhelmingClutterTakesEverything) {
  Rng rng(12);
  auto inst = make_instance({Vec<2>(0.0, 0.0)}, {0.9}, {Vec<2>(0.5, 0.5), Vec<2>(-1.0, 0.0)}, 4, rng);
  inst.models.measurement.mu_fa = 1e15;
  const auto r = enumerate_posterior<2>(inst);
  for (const auto& row : r.assoc) EXPECT_GT(row[0], 1.0 - 1e-9);
}

TEST(Enumeration, MarginalsAreDistributions) {
  Rng rng(13);
  for (int t = 0; t < 5; ++t) {
    const auto inst = make_instance({Vec<2>(-5.0, 0.0), Vec<2>(5.0, 0.0)}, {0.6, 0.9},
                                    {Vec<2>(-4.0, 1.0), Vec<2>(4.5, 0.0), Vec<2>(0.0, 0.0)}, 4, rng);
    const auto r = enumerate_posterior<2>(inst);
    ASSERT_EQ(r.assoc.size(), 3u);
    for (std::size_t l = 0; l < r.assoc.size(); ++l) {
      EXPECT_EQ(r.assoc[l].size(), 2 + 2 + l);
      EXPECT_NEAR(std::accumulate(r.assoc[l].begin(), r.assoc[l].end(), 0.0), 1.0, 1e-12);
      for (double v : r.assoc[l]) EXPECT_GE(v, 0.0);
    }
    for (double v : r.legacy_existence) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(Enumeration, TooLargeRejected) {
  Rng rng(14);
  DiscretizedInstance<2> inst;
  inst.models = gaussian_models();
  for (int k = 0; k < 4; ++k) inst.legacy.push_back(legacy_support(Vec<2>(0.0, 0.0), 1.0, 0.5, 2, rng));
  try {
    enumerate_posterior<2>(inst);
    FAIL() << "expected TooLarge";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}

TEST(McLikelihood, GaussianAgreesWithClosedForm) {
  Rng rng(15);
  KinematicState<2> x;
  x.p = Vec<2>(1.0, 2.0);
  Mat<2> E;
  E << 2.0, 0.5, 0.5, 1.0;
  const Mat<2> su = 0.5 * Mat<2>::Identity();
  const Vec<2> z(2.5, 1.0);
  const auto mc = mc_likelihood<2>(z, x, E, ShapeKind::GaussianExtent, su, 200'000, rng);
  const double exact = normal2(z - x.p, Mat<2>(E * E + su));
  EXPECT_LT(std::abs(mc.value - exact), 3.0 * mc.std_error);
}

TEST(McLikelihood, EllipseCentreIsInverseArea) {
  Rng rng(16);
  KinematicState<2> x;
  const Mat<2> E = Vec<2>(3.0, 2.0).asDiagonal();
  const auto mc =
      mc_likelihood<2>(Vec<2>::Zero(), x, E, ShapeKind::UniformEllipse, 1e-4 * Mat<2>::Identity(), 10'000, rng);
  EXPECT_NEAR(mc.value, 1.0 / (6.0 * std::numbers::pi), 1e-12);
}

TEST(Suites, SmallTreeSuiteAgrees) {
  TreeSuiteConfig cfg;
  cfg.seeds = 2;
  cfg.J = 20'000;
  cfg.tolerance = 0.03;
  const auto rep = tree_suite(1, cfg);
  EXPECT_EQ(rep.cases, 4);
  EXPECT_TRUE(rep.passed) << rep.to_json().dump(2);
}

TEST(Suites, SmallLoopySuiteAgrees) {
  LoopySuiteConfig cfg;
  cfg.instances = 2;
  cfg.J = 20'000;
  cfg.tolerance = 0.04;
  const auto rep = loopy_suite(1, cfg);
  EXPECT_EQ(rep.cases, 2);
  EXPECT_TRUE(rep.passed) << rep.to_json().dump(2);
}

}  // namespace
}  // namespace eot
