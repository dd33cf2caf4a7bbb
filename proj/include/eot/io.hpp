#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "eot/errors.hpp"
#include "eot/scenario.hpp"
#include "eot/tracker.hpp"

namespace eot {

using json = nlohmann::json;

namespace detail {

template <int D>
json vec_to_json(const Vec<D>& v) {
  json out = json::array();
  for (int d = 0; d < D; ++d) out.push_back(v(d));
  return out;
}

template <int D>
json mat_to_json(const Mat<D>& m) {
  json out = json::array();
  for (int r = 0; r < D; ++r) {
    json row = json::array();
    for (int c = 0; c < D; ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

template <int D>
Vec<D> vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(D))
    throw std::invalid_argument("expected an array of " + std::to_string(D) + " numbers");
  Vec<D> v;
  for (int d = 0; d < D; ++d) v(d) = j.at(d).get<double>();
  return v;
}

template <int D>
Mat<D> mat_from_json(const json& j) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(D))
    throw std::invalid_argument("expected a " + std::to_string(D) + "x" + std::to_string(D) + " matrix");
  Mat<D> m;
  for (int r = 0; r < D; ++r) m.row(r) = vec_from_json<D>(j.at(r)).transpose();
  return m;
}

inline json label_to_json(const Label& l) { return json::array({l.step, l.index}); }

inline Label label_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("label must be [step, index]");
  return Label{j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>()};
}

/// Calls fn(parsed, line_number) for every nonblank line; parse and
/// schema errors are reported with the 1-based line number.
template <class Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), n);
    } catch (const json::exception& e) {
      throw ParseError(n, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(n, e.what());
    }
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  return out;
}

}  // namespace detail

// ------------------------------------------------------------ measurements

template <int D>
void write_measurements(std::ostream& out, const std::vector<std::vector<Vec<D>>>& frames) {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    json z = json::array();
    for (const auto& m : frames[t]) z.push_back(detail::vec_to_json<D>(m));
    out << json{{"t", t}, {"z", z}}.dump() << '\n';
  }
}

/// Frames in file order; the "t" field is checked for presence but not
/// used for reordering.
template <int D>
std::vector<std::vector<Vec<D>>> read_measurements(std::istream& in) {
  std::vector<std::vector<Vec<D>>> out;
  detail::for_each_jsonl(in, [&](const json& j, std::size_t) {
    if (!j.is_object() || !j.contains("t") || !j.contains("z")) throw std::invalid_argument("need fields t and z");
    (void)j.at("t").get<std::int64_t>();
    std::vector<Vec<D>> frame;
    for (const auto& m : j.at("z")) frame.push_back(detail::vec_from_json<D>(m));
    out.push_back(std::move(frame));
  });
  return out;
}

template <int D>
std::vector<std::vector<Vec<D>>> replay_ingest(const std::string& path) {
  auto in = detail::open_input(path);
  return read_measurements<D>(in);
}

// ------------------------------------------------------------------ truth

template <int D>
void write_truth(std::ostream& out, const GroundTruth<D>& truth) {
  for (const auto& f : truth) {
    json objs = json::array();
    for (const auto& o : f.objects)
      objs.push_back({{"id", o.id},
                      {"p", detail::vec_to_json<D>(o.x.p)},
                      {"v", detail::vec_to_json<D>(o.x.v)},
                      {"E", detail::mat_to_json<D>(o.E)},
                      {"alive", o.alive}});
    out << json{{"t", f.t}, {"objects", objs}}.dump() << '\n';
  }
}

template <int D>
GroundTruth<D> read_truth(std::istream& in) {
  GroundTruth<D> out;
  detail::for_each_jsonl(in, [&](const json& j, std::size_t) {
    TruthFrame<D> f;
    f.t = j.at("t").get<int>();
    for (const auto& o : j.at("objects")) {
      TruthObject<D> obj;
      obj.id = o.at("id").get<int>();
      obj.x.p = detail::vec_from_json<D>(o.at("p"));
      obj.x.v = detail::vec_from_json<D>(o.at("v"));
      obj.E = detail::mat_from_json<D>(o.at("E"));
      obj.alive = o.at("alive").get<bool>();
      f.objects.push_back(obj);
    }
    out.push_back(std::move(f));
  });
  return out;
}

// ---------------------------------------------------------------- results

inline json ospa_to_json(const OspaResult& r) {
  return {{"total", r.total}, {"state", r.state}, {"cardinality", r.cardinality}};
}

inline json gospa_to_json(const GospaResult& r) {
  return {{"total", r.total}, {"state", r.state}, {"missed", r.missed}, {"false", r.false_alarm}};
}

template <int D>
json frame_result_to_json(const FrameResult<D>& r) {
  json det = json::array();
  for (const auto& e : r.detections)
    det.push_back({{"label", detail::label_to_json(e.label)},
                   {"existence", e.existence},
                   {"p", detail::vec_to_json<D>(e.x.p)},
                   {"v", detail::vec_to_json<D>(e.x.v)},
                   {"E", detail::mat_to_json<D>(e.E)},
                   {"size", e.size},
                   {"orientation", e.orientation}});
  json ex = json::array();
  for (const auto& [label, pe] : r.existence) ex.push_back({{"label", detail::label_to_json(label)}, {"pe", pe}});
  json out{{"step", r.step},
           {"n_measurements", r.n_measurements},
           {"runtime_ms", r.runtime_ms},
           {"messages", r.messages},
           {"messages_per_iteration", r.messages_per_iteration},
           {"detections", det},
           {"existence", ex}};
  out["ospa"] = r.ospa ? ospa_to_json(*r.ospa) : json(nullptr);
  out["gospa"] = r.gospa ? gospa_to_json(*r.gospa) : json(nullptr);
  return out;
}

template <int D>
FrameResult<D> frame_result_from_json(const json& j) {
  FrameResult<D> r;
  r.step = j.at("step").get<int>();
  r.n_measurements = j.value("n_measurements", 0);
  r.runtime_ms = j.value("runtime_ms", 0.0);
  r.messages = j.value("messages", std::int64_t{0});
  r.messages_per_iteration = j.value("messages_per_iteration", std::int64_t{0});
  for (const auto& d : j.at("detections")) {
    TrackEstimate<D> e;
    e.label = detail::label_from_json(d.at("label"));
    e.existence = d.at("existence").get<double>();
    e.x.p = detail::vec_from_json<D>(d.at("p"));
    e.x.v = detail::vec_from_json<D>(d.at("v"));
    e.E = detail::mat_from_json<D>(d.at("E"));
    e.size = d.value("size", 0.0);
    e.orientation = d.value("orientation", 0.0);
    r.detections.push_back(e);
  }
  if (j.contains("existence"))
    for (const auto& e : j.at("existence"))
      r.existence.emplace_back(detail::label_from_json(e.at("label")), e.at("pe").get<double>());
  if (j.contains("ospa") && !j.at("ospa").is_null()) {
    const auto& o = j.at("ospa");
    OspaResult v;
    v.total = o.at("total").get<double>();
    v.state = o.at("state").get<double>();
    v.cardinality = o.at("cardinality").get<double>();
    r.ospa = v;
  }
  if (j.contains("gospa") && !j.at("gospa").is_null()) {
    const auto& o = j.at("gospa");
    GospaResult v;
    v.total = o.at("total").get<double>();
    v.state = o.at("state").get<double>();
    v.missed = o.at("missed").get<double>();
    v.false_alarm = o.at("false").get<double>();
    r.gospa = v;
  }
  return r;
}

template <int D>
void write_results(std::ostream& out, const std::vector<FrameResult<D>>& results) {
  for (const auto& r : results) out << frame_result_to_json<D>(r).dump() << '\n';
}

template <int D>
std::vector<FrameResult<D>> read_results(std::istream& in) {
  std::vector<FrameResult<D>> out;
  detail::for_each_jsonl(in, [&](const json& j, std::size_t) { out.push_back(frame_result_from_json<D>(j)); });
  return out;
}

// ---------------------------------------------------------------- summary

inline const char* summary_header() {
  return "step,ospa_total,ospa_state,ospa_card,gospa_total,gospa_state,gospa_missed,gospa_false,runtime_ms,n_detected";
}

/// Shortest decimal form that reads back to the same double; "nan" for
/// missing values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <int D>
void write_summary(std::ostream& out, const std::vector<FrameResult<D>>& results) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out << summary_header() << '\n';
  for (const auto& r : results) {
    const OspaResult o = r.ospa.value_or(OspaResult{nan, nan, nan, {}});
    const GospaResult g = r.gospa.value_or(GospaResult{nan, nan, nan, nan, {}});
    out << r.step << ',' << format_number(o.total) << ',' << format_number(o.state) << ','
        << format_number(o.cardinality) << ',' << format_number(g.total) << ',' << format_number(g.state) << ','
        << format_number(g.missed) << ',' << format_number(g.false_alarm) << ',' << format_number(r.runtime_ms)
        << ',' << r.detections.size() << '\n';
  }
}

}  // namespace eot
