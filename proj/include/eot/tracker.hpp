#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "eot/errors.hpp"
#include "eot/metrics.hpp"
#include "eot/models.hpp"
#include "eot/particle_ops.hpp"
#include "eot/scenario.hpp"
#include "eot/spa.hpp"

namespace eot {

struct TrackerConfig {
  SpaConfig spa;
  std::size_t max_pos = 200;
  double jitter_std = 0.0;
  double velocity_jitter_std = 0.0;
  MetricConfig metric;
};

template <int D>
struct FrameResult {
  int step = 0;
  std::vector<TrackEstimate<D>> detections;
  std::vector<std::pair<Label, double>> existence;
  std::optional<OspaResult> ospa;
  std::optional<GospaResult> gospa;
  double runtime_ms = 0.0;
  std::int64_t messages = 0;
  std::int64_t messages_per_iteration = 0;
  int n_measurements = 0;
};

template <int D>
std::vector<MetricObject<D>> to_metric_objects(const std::vector<TrackEstimate<D>>& est) {
  std::vector<MetricObject<D>> out;
  for (const auto& e : est) out.push_back({e.x.p, e.E});
  return out;
}

template <int D>
std::vector<MetricObject<D>> to_metric_objects(const TruthFrame<D>& truth) {
  std::vector<MetricObject<D>> out;
  for (const auto& o : truth.objects)
    if (o.alive) out.push_back({o.x.p, o.E});
  return out;
}

/// Owns the set of POs across time steps.
template <int D>
class Tracker {
 public:
  Tracker(Models<D> models, TrackerConfig config, std::uint64_t seed)
      : models_(std::move(models)), config_(std::move(config)), seed_(seed) {
    models_.validate();
    config_.spa.validate();
    config_.metric.validate();
  }

  [[nodiscard]] const std::vector<PoBelief<D>>& state() const { return state_; }

  FrameResult<D> step(int t, const std::vector<Vec<D>>& measurements, const TruthFrame<D>* truth = nullptr) {
    const auto start = std::chrono::steady_clock::now();
    FrameResult<D> out;
    out.step = t;
    std::vector<Vec<D>> z;
    z.reserve(measurements.size());
    for (const auto& m : measurements)
      if (models_.measurement.roi.contains(m)) z.push_back(m);
    out.n_measurements = static_cast<int>(z.size());
    try {
      auto res = spa_step<D>(state_, z, models_, config_.spa, seed_, t);
      out.messages = res.diagnostics.messages_total;
      out.messages_per_iteration = res.diagnostics.messages_per_iteration;
      std::vector<PoBelief<D>> all = std::move(res.legacy);
      for (auto& b : res.fresh) all.push_back(std::move(b));
      all = prune<D>(std::move(all), config_.spa.P_pr);
      if (all.size() > config_.max_pos) {
        std::stable_sort(all.begin(), all.end(),
                         [](const PoBelief<D>& a, const PoBelief<D>& b) { return a.existence() > b.existence(); });
        all.resize(config_.max_pos);
        std::sort(all.begin(), all.end(), [](const PoBelief<D>& a, const PoBelief<D>& b) { return a.label < b.label; });
      }
      std::vector<PoBelief<D>> next(all.size());
      parallel_for(all.size(), config_.spa.threads, [&](std::size_t i) {
        Rng rng = make_rng(seed_, {static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(all[i].label.step),
                                   static_cast<std::uint64_t>(all[i].label.index), 3});
        next[i] = resample<D>(all[i], config_.spa.J, rng, config_.jitter_std,
                             config_.velocity_jitter_std);
        next[i].kind = PoKind::Legacy;
      });
      state_ = std::move(next);
      for (const auto& b : state_) out.existence.emplace_back(b.label, b.existence());
      for (const auto& b : detect<D>(state_, config_.spa.P_th))
        out.detections.push_back(estimate<D>(b, models_.measurement.shape));
    } catch (const FrameFailure&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NumericalFailure) throw FrameFailure(static_cast<std::size_t>(t), e.what());
      throw;
    }
    if (truth) {
      const auto tr = to_metric_objects<D>(*truth);
      const auto es = to_metric_objects<D>(out.detections);
      out.ospa = ospa<D>(tr, es, config_.metric);
      out.gospa = gospa<D>(tr, es, config_.metric);
    }
    out.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  Models<D> models_;
  TrackerConfig config_;
  std::uint64_t seed_;
  std::vector<PoBelief<D>> state_;
};

/// Runs the tracker over a sequence of measurement frames; frame i uses
/// time index i and, when given, truth frame i.
template <int D>
std::vector<FrameResult<D>> run(const std::vector<std::vector<Vec<D>>>& frames, const Models<D>& models,
                                const TrackerConfig& config, std::uint64_t seed,
                                const GroundTruth<D>* truth = nullptr) {
  Tracker<D> tracker(models, config, seed);
  std::vector<FrameResult<D>> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const TruthFrame<D>* tf = (truth && i < truth->size()) ? &(*truth)[i] : nullptr;
    out.push_back(tracker.step(static_cast<int>(i), frames[i], tf));
  }
  return out;
}

}  // namespace eot
