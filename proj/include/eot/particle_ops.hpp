#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "eot/errors.hpp"
#include "eot/geometry.hpp"
#include "eot/random.hpp"
#include "eot/spa.hpp"

namespace eot {

template <int D>
struct TrackEstimate {
  Label label;
  double existence = 0.0;
  KinematicState<D> x;
  Mat<D> E = Mat<D>::Zero();
  double size = 0.0;
  double orientation = 0.0;
};

/// Size convention of the estimate: ellipse area/volume for Gaussian and
/// elliptical extents, product of side lengths for cubes.
template <int D>
double extent_size(const Vec<D>& lambda, ShapeKind shape) {
  const double prod = lambda.cwiseMax(0.0).prod();
  if (shape == ShapeKind::UniformCube) return prod;
  if constexpr (D == 2) return std::numbers::pi * prod;
  return 4.0 / 3.0 * std::numbers::pi * prod;
}

/// Angle in [0, pi) of the principal eigenvector, flipped into the upper
/// half plane. Only the first two coordinates are used in 3-D.
template <int D>
double principal_orientation(const Vec<D>& v) {
  double a = std::atan2(v(1), v(0));
  if (a < 0.0) a += std::numbers::pi;
  if (a >= std::numbers::pi) a -= std::numbers::pi;
  return a;
}

template <int D>
TrackEstimate<D> estimate(const PoBelief<D>& belief, ShapeKind shape = ShapeKind::GaussianExtent) {
  const double pe = belief.existence();
  if (!(pe > 0.0)) throw Error(ErrorCode::NoExistence, "estimate of a belief with zero existence");
  TrackEstimate<D> out;
  out.label = belief.label;
  out.existence = pe;
  out.x.p.setZero();
  out.x.v.setZero();
  out.x.rate = 0.0;
  Mat<D> E = Mat<D>::Zero();
  for (const auto& p : belief.particles) {
    out.x.p += p.w * p.x.p;
    out.x.v += p.w * p.x.v;
    out.x.rate += p.w * p.x.rate;
    E += p.w * p.E;
  }
  out.x.p /= pe;
  out.x.v /= pe;
  out.x.rate /= pe;
  out.E = clamp_psd<D>(Mat<D>(E / pe), 0.0);
  const auto es = eigen_decompose<D>(out.E);
  out.size = extent_size<D>(es.values, shape);
  out.orientation = principal_orientation<D>(es.vectors.col(0));
  return out;
}

/// Beliefs with existence strictly above the threshold.
template <int D>
std::vector<PoBelief<D>> detect(const std::vector<PoBelief<D>>& beliefs, double P_th) {
  std::vector<PoBelief<D>> out;
  for (const auto& b : beliefs)
    if (b.existence() > P_th) out.push_back(b);
  return out;
}

/// Beliefs with existence at or above the pruning threshold.
template <int D>
std::vector<PoBelief<D>> prune(std::vector<PoBelief<D>> beliefs, double P_pr) {
  std::vector<PoBelief<D>> out;
  out.reserve(beliefs.size());
  for (auto& b : beliefs)
    if (!(b.existence() < P_pr)) out.push_back(std::move(b));
  return out;
}

/// Systematic resampling to J equally weighted particles. The final weight
/// absorbs the rounding of the others so that the weights still sum to the
/// original existence probability. Optional Gaussian jitter on position
/// and velocity.
template <int D>
PoBelief<D> resample(const PoBelief<D>& belief, int J, Rng& rng, double jitter_std = 0.0,
                     double velocity_jitter_std = 0.0) {
  const double pe = belief.existence();
  if (!(pe > 0.0)) throw Error(ErrorCode::NoExistence, "resampling a belief with zero existence");
  if (J < 1) throw Error(ErrorCode::InvalidConfig, "resampling needs at least one particle");
  PoBelief<D> out;
  out.label = belief.label;
  out.kind = belief.kind;
  out.particles.reserve(J);
  const double u0 = uniform01(rng) / J;
  std::size_t i = 0;
  double cum = belief.particles.empty() ? 0.0 : belief.particles[0].w / pe;
  const std::size_t n = belief.particles.size();
  for (int j = 0; j < J; ++j) {
    const double u = u0 + static_cast<double>(j) / J;
    while (u > cum && i + 1 < n) {
      ++i;
      cum += belief.particles[i].w / pe;
    }
    out.particles.push_back(belief.particles[i]);
  }
  const double w = pe / J;
  double acc = 0.0;
  for (int j = 0; j + 1 < J; ++j) {
    out.particles[j].w = w;
    acc += w;
  }
  out.particles[J - 1].w = pe - acc;
  if (jitter_std > 0.0 || velocity_jitter_std > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& p : out.particles)
      for (int d = 0; d < D; ++d) {
        p.x.p(d) += jitter_std * normal(rng);
        p.x.v(d) += velocity_jitter_std * normal(rng);
      }
  }
  return out;
}

}  // namespace eot
