#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "eot/errors.hpp"
#include "eot/models.hpp"
#include "eot/random.hpp"

namespace eot {

template <int D>
struct ScenarioConfig {
  int n_objects = 3;
  Box<D> roi;
  double circle_radius = 75.0;
  double initial_speed = 10.0;
  std::vector<int> birth_times{3, 6, 9};
  std::vector<int> death_times{83, 86, 89};
  double T = 0.2;
  double sigma_c = 1.0;
  Mat<D> extent_mean = 3.0 * Mat<D>::Identity();
  double extent_dof = 100.0;
  int n_steps = 100;

  void validate() const {
    if (n_objects < 0 || n_steps < 0) throw Error(ErrorCode::InvalidConfig, "negative object or step count");
    if (static_cast<int>(birth_times.size()) != n_objects || static_cast<int>(death_times.size()) != n_objects)
      throw Error(ErrorCode::InvalidConfig, "need one birth and one death time per object");
    for (int i = 0; i < n_objects; ++i)
      if (!(birth_times[i] < death_times[i])) throw Error(ErrorCode::InvalidConfig, "birth must precede death");
    if (!(T > 0.0) || !(sigma_c >= 0.0)) throw Error(ErrorCode::InvalidConfig, "invalid T or sigma_c");
    if (!(extent_dof > D + 1)) throw Error(ErrorCode::InvalidConfig, "extent prior dof must exceed d+1");
    if (!(circle_radius >= 0.0)) throw Error(ErrorCode::InvalidConfig, "negative circle radius");
  }
};

/// Ten objects born and dying in pairs over 100 steps.
template <int D>
ScenarioConfig<D> paper_scenario() {
  ScenarioConfig<D> cfg;
  cfg.n_objects = 10;
  cfg.birth_times = {3, 3, 6, 6, 9, 9, 12, 12, 15, 15};
  cfg.death_times = {83, 83, 86, 86, 89, 89, 92, 92, 95, 95};
  return cfg;
}

/// Three crossing objects, same geometry at a scale that runs on a laptop.
template <int D>
ScenarioConfig<D> desk_scenario() {
  return ScenarioConfig<D>{};
}

template <int D>
struct TruthObject {
  int id = 0;
  KinematicState<D> x;
  Mat<D> E = Mat<D>::Identity();
  bool alive = false;
};

template <int D>
struct TruthFrame {
  int t = 0;
  std::vector<TruthObject<D>> objects;

  [[nodiscard]] std::vector<TruthObject<D>> alive() const {
    std::vector<TruthObject<D>> out;
    for (const auto& o : objects)
      if (o.alive) out.push_back(o);
    return out;
  }
};

template <int D>
using GroundTruth = std::vector<TruthFrame<D>>;

/// Objects start evenly spaced on a circle around the ROI centre and head
/// towards it; states evolve from step 0, objects count as present between
/// their birth (inclusive) and death (exclusive) steps.
template <int D>
GroundTruth<D> generate_truth(const ScenarioConfig<D>& cfg, Rng& rng) {
  cfg.validate();
  const Vec<D> centre = 0.5 * (cfg.roi.lo + cfg.roi.hi);
  std::vector<KinematicState<D>> states(cfg.n_objects);
  std::vector<Mat<D>> extents(cfg.n_objects);
  for (int i = 0; i < cfg.n_objects; ++i) {
    const double a = 2.0 * std::numbers::pi * i / cfg.n_objects;
    Vec<D> dir = Vec<D>::Zero();
    dir(0) = std::cos(a);
    dir(1) = std::sin(a);
    states[i].p = centre + cfg.circle_radius * dir;
    states[i].v = -cfg.initial_speed * dir;
    extents[i] = sample_inverse_wishart_mean<D>(cfg.extent_mean, cfg.extent_dof, rng);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  GroundTruth<D> out(cfg.n_steps);
  for (int n = 0; n < cfg.n_steps; ++n) {
    if (n > 0) {
      for (auto& s : states) {
        Vec<D> nu;
        for (int d = 0; d < D; ++d) nu(d) = cfg.sigma_c * normal(rng);
        s.p += cfg.T * s.v + 0.5 * cfg.T * cfg.T * nu;
        s.v += cfg.T * nu;
      }
    }
    out[n].t = n;
    for (int i = 0; i < cfg.n_objects; ++i) {
      TruthObject<D> o;
      o.id = i;
      o.x = states[i];
      o.E = extents[i];
      o.alive = n >= cfg.birth_times[i] && n < cfg.death_times[i];
      out[n].objects.push_back(o);
    }
  }
  return out;
}

/// Draws a reflection point offset v from the object's shape.
template <int D>
Vec<D> sample_shape_offset(const Mat<D>& E, ShapeKind shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec<D> n;
  for (int d = 0; d < D; ++d) n(d) = normal(rng);
  if (shape == ShapeKind::GaussianExtent) return E * n;
  const auto es = eigen_decompose<D>(E);
  Vec<D> local;
  if (shape == ShapeKind::UniformEllipse) {
    const double r = std::pow(uni(rng), 1.0 / D);
    local = (r / n.norm()) * n;
    local.array() *= es.values.array();
  } else {
    for (int d = 0; d < D; ++d) local(d) = (uni(rng) - 0.5) * es.values(d);
  }
  return es.vectors * local;
}

template <int D>
std::vector<Vec<D>> generate_measurements(const TruthFrame<D>& frame, const MeasurementModel<D>& model, Rng& rng) {
  std::vector<Vec<D>> z;
  const Mat<D> L = psd_sqrt_factor<D>(model.sigma_u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const auto& o : frame.objects) {
    if (!o.alive) continue;
    const double mu = measurement_rate<D>(o.x, o.E, model);
    if (!(mu > 0.0)) continue;
    std::poisson_distribution<int> count(mu);
    const int c = count(rng);
    for (int i = 0; i < c; ++i) {
      Vec<D> u;
      for (int d = 0; d < D; ++d) u(d) = normal(rng);
      z.push_back(o.x.p + sample_shape_offset<D>(o.E, model.shape, rng) + L * u);
    }
  }
  if (model.mu_fa > 0.0) {
    std::poisson_distribution<int> count(model.mu_fa);
    const int c = count(rng);
    for (int i = 0; i < c; ++i) {
      Vec<D> p;
      for (int d = 0; d < D; ++d) p(d) = model.roi.lo(d) + (model.roi.hi(d) - model.roi.lo(d)) * uni(rng);
      z.push_back(p);
    }
  }
  std::shuffle(z.begin(), z.end(), rng);
  return z;
}

template <int D>
struct Simulation {
  GroundTruth<D> truth;
  std::vector<std::vector<Vec<D>>> measurements;
};

/// Truth from one stream, each frame's measurements from its own stream.
template <int D>
Simulation<D> simulate(const ScenarioConfig<D>& cfg, const MeasurementModel<D>& model, std::uint64_t seed) {
  Simulation<D> out;
  Rng truth_rng = make_rng(seed, {0x7472757468ULL});
  out.truth = generate_truth<D>(cfg, truth_rng);
  for (const auto& frame : out.truth) {
    Rng rng = make_rng(seed, {0x6d656173ULL, static_cast<std::uint64_t>(frame.t)});
    out.measurements.push_back(generate_measurements<D>(frame, model, rng));
  }
  return out;
}

}  // namespace eot
