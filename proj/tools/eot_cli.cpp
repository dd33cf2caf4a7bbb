#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eot/config_json.hpp"
#include "eot/errors.hpp"
#include "eot/io.hpp"
#include "eot/metrics.hpp"
#include "eot/parallel.hpp"
#include "eot/scenario.hpp"
#include "eot/tracker.hpp"
#include "eot/validation.hpp"

namespace {

using eot::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code_for(eot::ErrorCode code) {
  switch (code) {
    case eot::ErrorCode::NumericalFailure:
    case eot::ErrorCode::DegenerateSupport:
    case eot::ErrorCode::NoExistence: return kExitNumerical;
    default: return kExitData;
  }
}

json read_json_file(const std::string& path) {
  auto in = eot::detail::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw eot::Error(eot::ErrorCode::InvalidConfig, path + ": " + e.what());
  }
}

/// --threads wins, then EOT_THREADS, then the config file, then the
/// hardware concurrency.
int resolve_threads(std::optional<int> flag, const json& config) {
  if (flag) return *flag;
  if (std::getenv("EOT_THREADS")) return eot::default_thread_count();
  if (config.contains("spa") && config.at("spa").contains("threads")) return config.at("spa").at("threads").get<int>();
  return eot::default_thread_count();
}

template <int D>
eot::CliConfig<D> parse_config(const json& j) {
  auto c = eot::config_from_json<D>(j);
  for (const auto& w : c.validate()) std::cerr << "warning: " << w << '\n';
  return c;
}

std::filesystem::path prepare_out_dir(const std::string& out) {
  std::filesystem::path dir(out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw eot::Error(eot::ErrorCode::ParseError, "cannot create " + out + ": " + ec.message());
  return dir;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

template <int D>
void simulate_cmd(const json& j, const SimulateArgs& a) {
  const auto cfg = parse_config<D>(j);
  const auto sim = eot::simulate<D>(cfg.scenario, cfg.models.measurement, a.seed.value_or(cfg.seed));
  const auto dir = prepare_out_dir(a.out);
  auto mo = eot::detail::open_output((dir / "measurements.jsonl").string());
  eot::write_measurements<D>(mo, sim.measurements);
  auto to = eot::detail::open_output((dir / "truth.jsonl").string());
  eot::write_truth<D>(to, sim.truth);
  std::cout << "wrote " << sim.measurements.size() << " frames to " << dir.string() << '\n';
}

// ------------------------------------------------------------------- track

struct TrackArgs {
  std::string measurements;
  std::string config;
  std::string truth;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> particles;
  std::optional<int> iterations;
  std::optional<double> gate;
  std::optional<int> threads;
  std::optional<double> jitter;
  std::optional<double> velocity_jitter;
};

template <int D>
void track_cmd(const json& j, const TrackArgs& a) {
  auto cfg = parse_config<D>(j);
  auto& tc = cfg.tracker;
  if (a.particles) tc.spa.J = *a.particles;
  if (a.iterations) tc.spa.P = *a.iterations;
  if (a.gate) tc.spa.gate_radius = *a.gate;
  if (a.jitter) tc.jitter_std = *a.jitter;
  if (a.velocity_jitter) tc.velocity_jitter_std = *a.velocity_jitter;
  tc.spa.threads = resolve_threads(a.threads, j);
  (void)cfg.validate();

  const auto frames = eot::replay_ingest<D>(a.measurements);
  std::optional<eot::GroundTruth<D>> truth;
  if (!a.truth.empty()) {
    auto in = eot::detail::open_input(a.truth);
    truth = eot::read_truth<D>(in);
  }
  const auto results = eot::run<D>(frames, cfg.models, tc, a.seed.value_or(cfg.seed), truth ? &*truth : nullptr);

  const auto dir = prepare_out_dir(a.out);
  auto ro = eot::detail::open_output((dir / "results.jsonl").string());
  eot::write_results<D>(ro, results);
  auto so = eot::detail::open_output((dir / "summary.csv").string());
  eot::write_summary<D>(so, results);

  std::int64_t messages = 0;
  for (const auto& r : results) messages += r.messages;
  std::cout << "tracked " << results.size() << " frames, " << messages << " messages, results in " << dir.string()
            << '\n';
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string results;
  std::string truth;
  std::string config;
  std::string out;
  std::optional<double> p;
  std::optional<double> c;
  std::string base;
};

template <int D>
void eval_cmd(const EvalArgs& a, eot::MetricConfig metric) {
  if (a.p) metric.p = *a.p;
  if (a.c) metric.c = *a.c;
  if (a.base == "euclidean") metric.base = eot::BaseDistance::Euclidean;
  else if (a.base == "gw") metric.base = eot::BaseDistance::GaussianWasserstein;
  else if (!a.base.empty()) throw eot::Error(eot::ErrorCode::InvalidConfig, "--base must be gw or euclidean");
  metric.validate();

  auto rin = eot::detail::open_input(a.results);
  auto results = eot::read_results<D>(rin);
  auto tin = eot::detail::open_input(a.truth);
  const auto truth = eot::read_truth<D>(tin);
  for (auto& r : results) {
    if (r.step < 0 || static_cast<std::size_t>(r.step) >= truth.size())
      throw eot::Error(eot::ErrorCode::ParseError, "no truth frame for step " + std::to_string(r.step));
    const auto tr = eot::to_metric_objects<D>(truth[r.step]);
    const auto es = eot::to_metric_objects<D>(r.detections);
    r.ospa = eot::ospa<D>(tr, es, metric);
    r.gospa = eot::gospa<D>(tr, es, metric);
  }
  if (a.out.empty()) {
    eot::write_summary<D>(std::cout, results);
  } else {
    auto out = eot::detail::open_output(a.out);
    eot::write_summary<D>(out, results);
  }
}

// ------------------------------------------------------------------ oracle

struct OracleArgs {
  std::string suite = "all";
  std::uint64_t seed = 1;
  std::string out;
};

int oracle_cmd(const OracleArgs& a) {
  std::vector<eot::SuiteReport> reports;
  if (a.suite == "likelihood" || a.suite == "all") reports.push_back(eot::likelihood_suite(a.seed));
  if (a.suite == "tree" || a.suite == "all") reports.push_back(eot::tree_suite(a.seed));
  if (a.suite == "loopy" || a.suite == "all") reports.push_back(eot::loopy_suite(a.seed));
  bool passed = true;
  json suites = json::array();
  for (const auto& r : reports) {
    passed = passed && r.passed;
    suites.push_back(r.to_json());
  }
  const json report{{"seed", a.seed}, {"passed", passed}, {"suites", suites}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    auto out = eot::detail::open_output(a.out);
    out << report.dump(2) << '\n';
  }
  return passed ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-based sum-product tracking of extended objects"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate ground truth and measurements");
  simulate->add_option("--config", sim.config, "JSON config")->required();
  simulate->add_option("--seed", sim.seed, "Random seed (overrides the config)");
  simulate->add_option("--out", sim.out, "Output directory")->required();

  TrackArgs trk;
  auto* track = app.add_subcommand("track", "Run the tracker on a measurement file");
  track->add_option("--measurements", trk.measurements, "Measurement JSONL")->required();
  track->add_option("--config", trk.config, "JSON config")->required();
  track->add_option("--truth", trk.truth, "Optional truth JSONL for per-frame metrics");
  track->add_option("--seed", trk.seed, "Random seed (overrides the config)");
  track->add_option("--out", trk.out, "Output directory")->required();
  track->add_option("--particles", trk.particles, "Particles per PO")->check(CLI::Range(2, 10'000'000));
  track->add_option("--iterations", trk.iterations, "Message-passing iterations")->check(CLI::Range(1, 1000));
  track->add_option("--gate", trk.gate, "Gate radius in metres")->check(CLI::PositiveNumber);
  track->add_option("--threads", trk.threads, "Worker threads")->check(CLI::Range(1, 4096));
  track->add_option("--jitter", trk.jitter, "Position jitter after resampling (m)")->check(CLI::NonNegativeNumber);
  track->add_option("--velocity-jitter", trk.velocity_jitter, "Velocity jitter after resampling (m/s)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Recompute OSPA and GOSPA of a results file");
  eval->add_option("--results", ev.results, "Results JSONL")->required();
  eval->add_option("--truth", ev.truth, "Truth JSONL")->required();
  eval->add_option("--config", ev.config, "JSON config for the metric defaults and dimension");
  eval->add_option("--out", ev.out, "Output CSV (stdout when omitted)");
  eval->add_option("--p", ev.p, "Metric order")->check(CLI::Range(1.0, 1e6));
  eval->add_option("--c", ev.c, "Cut-off distance")->check(CLI::PositiveNumber);
  eval->add_option("--base", ev.base, "Base distance: gw or euclidean");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "Run the validation suites");
  oracle->add_option("--suite", orc.suite, "likelihood, tree, loopy or all")
      ->check(CLI::IsMember({"likelihood", "tree", "loopy", "all"}));
  oracle->add_option("--seed", orc.seed, "Random seed");
  oracle->add_option("--out", orc.out, "Report file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) {
      const json j = read_json_file(sim.config);
      if (eot::config_dimension(j) == 2) simulate_cmd<2>(j, sim);
      else simulate_cmd<3>(j, sim);
    } else if (*track) {
      const json j = read_json_file(trk.config);
      if (eot::config_dimension(j) == 2) track_cmd<2>(j, trk);
      else track_cmd<3>(j, trk);
    } else if (*eval) {
      json j = json{{"version", eot::kConfigVersion}};
      if (!ev.config.empty()) j = read_json_file(ev.config);
      if (eot::config_dimension(j) == 2) eval_cmd<2>(ev, eot::config_from_json<2>(j).tracker.metric);
      else eval_cmd<3>(ev, eot::config_from_json<3>(j).tracker.metric);
    } else if (*oracle) {
      return oracle_cmd(orc);
    }
  } catch (const eot::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
