#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "eot/errors.hpp"
#include "eot/io.hpp"
#include "eot/metrics.hpp"
#include "eot/models.hpp"
#include "eot/scenario.hpp"
#include "eot/tracker.hpp"

namespace eot {

inline constexpr int kConfigVersion = 1;

/// Everything a CLI command needs: models, SPA/tracker settings, scenario,
/// metric and seed.
template <int D>
struct CliConfig {
  Models<D> models;
  TrackerConfig tracker;
  ScenarioConfig<D> scenario;
  std::uint64_t seed = 1;

  /// Throws on invalid values; returns advisory warnings.
  [[nodiscard]] std::vector<std::string> validate() const {
    models.validate();
    tracker.spa.validate();
    tracker.metric.validate();
    scenario.validate();
    if (tracker.max_pos < 1) throw Error(ErrorCode::InvalidConfig, "max_pos must be at least 1");
    if (tracker.jitter_std < 0.0 || tracker.velocity_jitter_std < 0.0)
      throw Error(ErrorCode::InvalidConfig, "jitter must be nonnegative");
    std::vector<std::string> warnings;
    if (tracker.spa.P_pr > tracker.spa.P_th) warnings.emplace_back("P_pr exceeds P_th");
    return warnings;
  }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
}

/// A number n means n * I; otherwise a full matrix.
template <int D>
Mat<D> matrix_or_scalar(const json& j) {
  if (j.is_number()) return j.get<double>() * Mat<D>::Identity();
  return mat_from_json<D>(j);
}

template <int D>
Box<D> box_from_json(const json& j) {
  reject_unknown(j, {"lo", "hi"}, "roi");
  Box<D> b;
  b.lo = vec_from_json<D>(j.at("lo"));
  b.hi = vec_from_json<D>(j.at("hi"));
  return b;
}

inline RateSpec rate_from_json(const json& j) {
  reject_unknown(j, {"kind", "value"}, "rate_spec");
  RateSpec r;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "fixed") r.kind = RateKind::Fixed;
  else if (kind == "density") r.kind = RateKind::Density;
  else if (kind == "state") r.kind = RateKind::StateComponent;
  else throw Error(ErrorCode::InvalidConfig, "rate_spec.kind must be fixed, density or state");
  r.value = j.value("value", r.value);
  return r;
}

inline const char* rate_kind_name(RateKind k) {
  switch (k) {
    case RateKind::Fixed: return "fixed";
    case RateKind::Density: return "density";
    case RateKind::StateComponent: return "state";
  }
  return "fixed";
}

}  // namespace detail

/// Reads the "dim" field (default 2) so that callers can dispatch on it.
inline int config_dimension(const json& j) {
  const int d = j.value("dim", 2);
  if (d != 2 && d != 3) throw Error(ErrorCode::InvalidConfig, "dim must be 2 or 3");
  return d;
}

template <int D>
CliConfig<D> config_from_json(const json& j) {
  using namespace detail;
  try {
    reject_unknown(j, {"version", "dim", "seed", "p_s", "mu_fa", "mu_n", "sigma_u", "sigma_c", "q_wishart", "T",
                       "rotation", "shape", "rate_spec", "roi", "birth", "spa", "scenario", "metric"},
                   "config");
    if (!j.contains("version")) throw Error(ErrorCode::InvalidConfig, "config needs a version field");
    if (j.at("version").get<int>() != kConfigVersion)
      throw Error(ErrorCode::InvalidConfig, "unsupported config version " + j.at("version").dump());
    if (config_dimension(j) != D) throw Error(ErrorCode::InvalidConfig, "config dimension mismatch");

    CliConfig<D> c;
    auto& m = c.models;
    c.seed = j.value("seed", c.seed);
    m.p_s = j.value("p_s", m.p_s);
    m.measurement.mu_fa = j.value("mu_fa", m.measurement.mu_fa);
    m.birth.mu_n = j.value("mu_n", m.birth.mu_n);
    if (j.contains("sigma_u")) {
      const auto& s = j.at("sigma_u");
      // a number is the per-axis standard deviation, a matrix the covariance
      m.measurement.sigma_u = s.is_number() ? Mat<D>(s.get<double>() * s.get<double>() * Mat<D>::Identity())
                                            : mat_from_json<D>(s);
    }
    m.transition.sigma_c = j.value("sigma_c", m.transition.sigma_c);
    m.transition.q = j.value("q_wishart", m.transition.q);
    m.transition.T = j.value("T", m.transition.T);
    if (j.contains("rotation")) {
      const auto r = j.at("rotation").get<std::string>();
      if (r == "identity") m.transition.rotation = RotationPolicy::Identity;
      else if (r == "heading") m.transition.rotation = RotationPolicy::HeadingAligned;
      else throw Error(ErrorCode::InvalidConfig, "rotation must be identity or heading");
    }
    if (j.contains("shape")) m.measurement.shape = shape_from_string(j.at("shape").get<std::string>());
    if (j.contains("rate_spec")) m.measurement.rate = rate_from_json(j.at("rate_spec"));
    if (j.contains("roi")) m.measurement.roi = box_from_json<D>(j.at("roi"));
    m.birth.roi = m.measurement.roi;
    c.scenario.roi = m.measurement.roi;
    c.scenario.T = m.transition.T;
    c.scenario.sigma_c = m.transition.sigma_c;

    if (j.contains("birth")) {
      const auto& b = j.at("birth");
      reject_unknown(b, {"velocity_cov", "extent_mean", "extent_dof", "rate_shape", "rate_scale"}, "birth");
      if (b.contains("velocity_cov")) m.birth.velocity_cov = matrix_or_scalar<D>(b.at("velocity_cov"));
      if (b.contains("extent_mean")) m.birth.extent_mean = matrix_or_scalar<D>(b.at("extent_mean"));
      m.birth.extent_dof = b.value("extent_dof", m.birth.extent_dof);
      m.birth.rate_shape = b.value("rate_shape", m.birth.rate_shape);
      m.birth.rate_scale = b.value("rate_scale", m.birth.rate_scale);
    }

    if (j.contains("spa")) {
      const auto& s = j.at("spa");
      reject_unknown(s, {"P", "J", "P_th", "P_pr", "gate_radius", "sort_measurements", "threads", "max_pos",
                         "jitter_std", "velocity_jitter_std"},
                     "spa");
      auto& spa = c.tracker.spa;
      spa.P = s.value("P", spa.P);
      spa.J = s.value("J", spa.J);
      spa.P_th = s.value("P_th", spa.P_th);
      spa.P_pr = s.value("P_pr", spa.P_pr);
      if (s.contains("gate_radius") && !s.at("gate_radius").is_null()) spa.gate_radius = s.at("gate_radius").get<double>();
      spa.sort_measurements = s.value("sort_measurements", spa.sort_measurements);
      spa.threads = s.value("threads", spa.threads);
      c.tracker.max_pos = s.value("max_pos", c.tracker.max_pos);
      c.tracker.jitter_std = s.value("jitter_std", c.tracker.jitter_std);
      c.tracker.velocity_jitter_std = s.value("velocity_jitter_std", c.tracker.velocity_jitter_std);
    }

    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      reject_unknown(s, {"preset", "n_objects", "circle_radius", "initial_speed", "birth_times", "death_times",
                         "n_steps", "extent_mean", "extent_dof"},
                     "scenario");
      auto& sc = c.scenario;
      if (s.contains("preset")) {
        const auto p = s.at("preset").get<std::string>();
        if (p == "paper") sc = paper_scenario<D>();
        else if (p == "desk") sc = desk_scenario<D>();
        else throw Error(ErrorCode::InvalidConfig, "scenario preset must be desk or paper");
        sc.roi = m.measurement.roi;
        sc.T = m.transition.T;
        sc.sigma_c = m.transition.sigma_c;
      }
      sc.n_objects = s.value("n_objects", sc.n_objects);
      sc.circle_radius = s.value("circle_radius", sc.circle_radius);
      sc.initial_speed = s.value("initial_speed", sc.initial_speed);
      if (s.contains("birth_times")) sc.birth_times = s.at("birth_times").get<std::vector<int>>();
      if (s.contains("death_times")) sc.death_times = s.at("death_times").get<std::vector<int>>();
      sc.n_steps = s.value("n_steps", sc.n_steps);
      if (s.contains("extent_mean")) sc.extent_mean = matrix_or_scalar<D>(s.at("extent_mean"));
      sc.extent_dof = s.value("extent_dof", sc.extent_dof);
    }

    if (j.contains("metric")) {
      const auto& s = j.at("metric");
      reject_unknown(s, {"p", "c", "base"}, "metric");
      auto& mc = c.tracker.metric;
      mc.p = s.value("p", mc.p);
      mc.c = s.value("c", mc.c);
      if (s.contains("base")) {
        const auto b = s.at("base").get<std::string>();
        if (b == "gw") mc.base = BaseDistance::GaussianWasserstein;
        else if (b == "euclidean") mc.base = BaseDistance::Euclidean;
        else throw Error(ErrorCode::InvalidConfig, "metric base must be gw or euclidean");
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

template <int D>
json config_to_json(const CliConfig<D>& c) {
  using namespace detail;
  const auto& m = c.models;
  const auto& spa = c.tracker.spa;
  const auto& sc = c.scenario;
  json out{{"version", kConfigVersion},
           {"dim", D},
           {"seed", c.seed},
           {"p_s", m.p_s},
           {"mu_fa", m.measurement.mu_fa},
           {"mu_n", m.birth.mu_n},
           {"sigma_u", mat_to_json<D>(m.measurement.sigma_u)},
           {"sigma_c", m.transition.sigma_c},
           {"q_wishart", m.transition.q},
           {"T", m.transition.T},
           {"rotation", m.transition.rotation == RotationPolicy::Identity ? "identity" : "heading"},
           {"shape", to_string(m.measurement.shape)},
           {"rate_spec", {{"kind", rate_kind_name(m.measurement.rate.kind)}, {"value", m.measurement.rate.value}}},
           {"roi", {{"lo", vec_to_json<D>(m.measurement.roi.lo)}, {"hi", vec_to_json<D>(m.measurement.roi.hi)}}},
           {"birth",
            {{"velocity_cov", mat_to_json<D>(m.birth.velocity_cov)},
             {"extent_mean", mat_to_json<D>(m.birth.extent_mean)},
             {"extent_dof", m.birth.extent_dof},
             {"rate_shape", m.birth.rate_shape},
             {"rate_scale", m.birth.rate_scale}}},
           {"spa",
            {{"P", spa.P},
             {"J", spa.J},
             {"P_th", spa.P_th},
             {"P_pr", spa.P_pr},
             {"gate_radius", spa.gate_radius ? json(*spa.gate_radius) : json(nullptr)},
             {"sort_measurements", spa.sort_measurements},
             {"threads", spa.threads},
             {"max_pos", c.tracker.max_pos},
             {"jitter_std", c.tracker.jitter_std},
             {"velocity_jitter_std", c.tracker.velocity_jitter_std}}},
           {"scenario",
            {{"n_objects", sc.n_objects},
             {"circle_radius", sc.circle_radius},
             {"initial_speed", sc.initial_speed},
             {"birth_times", sc.birth_times},
             {"death_times", sc.death_times},
             {"n_steps", sc.n_steps},
             {"extent_mean", mat_to_json<D>(sc.extent_mean)},
             {"extent_dof", sc.extent_dof}}},
           {"metric",
            {{"p", c.tracker.metric.p},
             {"c", c.tracker.metric.c},
             {"base", c.tracker.metric.base == BaseDistance::Euclidean ? "euclidean" : "gw"}}}};
  return out;
}

template <int D>
CliConfig<D> load_config(const std::string& path) {
  auto in = detail::open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  return config_from_json<D>(j);
}

}  // namespace eot
