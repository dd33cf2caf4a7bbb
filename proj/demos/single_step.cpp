#include <cstdio>
#include <vector>

#include "eot/scenario.hpp"
#include "eot/tracker.hpp"

/// Runs the desk scenario for a few steps and prints, per step, the
/// measurement count, the message count and the detected objects next to
/// the ground truth.
int main() {
  using namespace eot;
  Models<2> models;
  TrackerConfig config;
  config.spa.J = 500;
  config.jitter_std = 0.3;
  config.velocity_jitter_std = 0.7;

  auto scenario = desk_scenario<2>();
  scenario.n_steps = 20;
  const auto sim = simulate<2>(scenario, models.measurement, 1);

  Tracker<2> tracker(models, config, 7);
  for (int t = 0; t < scenario.n_steps; ++t) {
    const auto r = tracker.step(t, sim.measurements[t], &sim.truth[t]);
    std::printf("step %2d  M=%3d  messages=%6lld  POs=%3zu  detected=%zu  OSPA=%.2f\n", t, r.n_measurements,
                static_cast<long long>(r.messages), r.existence.size(), r.detections.size(), r.ospa->total);
    for (const auto& d : r.detections)
      std::printf("    track (%lld,%lld)  p=(%7.2f,%7.2f)  pe=%.3f\n", static_cast<long long>(d.label.step),
                  static_cast<long long>(d.label.index), d.x.p(0), d.x.p(1), d.existence);
    for (const auto& o : sim.truth[t].objects)
      if (o.alive) std::printf("    truth %d        p=(%7.2f,%7.2f)\n", o.id, o.x.p(0), o.x.p(1));
  }
  return 0;
}
