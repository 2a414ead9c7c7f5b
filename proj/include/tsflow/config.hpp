#pragma once

// Experiment configuration read from JSON.  Unknown keys are errors, and every
// rational is written as a string ("p/q", an integer, or a finite decimal) or
// as a JSON integer.  JSON floating-point numbers are rejected.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsflow/error.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

using Json = nlohmann::json;

struct LevelSpec {
  Rational lo, hi, coeff;
};

struct ProbeConfig {
  int stage = 1;
  std::vector<LevelSpec> f, g, base;
};

struct LimitsConfig {
  std::vector<Rational> alpha_list;
  Rational beta{0};
  Rational epsilon{1, 4};
  int samples_per_stage = 17;
  int stage_lo = 1, stage_hi = 1;
  int depth = 2;
  std::optional<Rational> cluster_tol;  // default: alpha / 100
  int grid_radius = 2;
};

enum class UMode { estimate, fixed };

struct TensorConfig {
  std::vector<Rational> alphas;
  int n = 2;
  int stage_lo = 1, stage_hi = 1;
  UMode u_mode = UMode::estimate;
  Rational u_fixed{0};
};

struct SymConfig {
  unsigned truncation_N = 6;
  std::vector<unsigned> multi_index;
  int stage = 1;
  std::vector<Rational> times;
  Rational scale{1};  // multiplier applied to f and g
};

// A shift written as a rational or as "[-][p]u[/q]" in terms of u_hat.
struct ShiftExpr {
  Rational u_coeff{0};
  Rational constant{0};
  Rational eval(const Rational& u) const { return u_coeff * u + constant; }
};

struct CyclicConfig {
  std::vector<int> K_list;
  int stage = 1;
  std::vector<std::vector<ShiftExpr>> targets;
  double tol_rank = 1e-8;
  double tol_psd = 1e-9;
  int in_span_power = 1;
};

struct MetricConfig {
  Rational grid_step{1, 16};
  int basis_count = 8;
  int stage = 1;
  std::vector<FlowParams> flows;
  int random_triples = 20;
  std::uint64_t seed = 1;
};

struct Thresholds {
  Rational in_span_residual{1, 10000000000};  // relative to |target|^2
  Rational solver_tolerance{1, 10000000000};  // relative slack for residual monotonicity
  int trend_window = 3;
};

struct ExperimentConfig {
  std::string name = "experiment";
  FlowParams flow;
  ProbeConfig probe;
  LimitsConfig limits;
  TensorConfig tensor;
  SymConfig sym;
  CyclicConfig cyclic;
  MetricConfig metric;
  Thresholds thresholds;
  std::string format = "json";
  std::string path;
  Json canonical;  // the parsed document, used for hashing
};

namespace detail {

inline void only_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw Error(ErrorCode::InvalidConfig, "unknown key " + where + "." + it.key());
}

inline Rational rational_of(const Json& v, const std::string& where) {
  if (v.is_string()) {
    try {
      return parse_rational(v.get<std::string>());
    } catch (const Error&) {
      throw Error(ErrorCode::InvalidConfig, where + ": not an exact rational");
    }
  }
  if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
  throw Error(ErrorCode::InvalidConfig, where + " must be a rational string or an integer");
}

inline int int_of(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) throw Error(ErrorCode::InvalidConfig, where + " must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < INT32_MIN || x > INT32_MAX) throw Error(ErrorCode::InvalidConfig, where + " out of range");
  return static_cast<int>(x);
}

inline bool bool_of(const Json& v, const std::string& where) {
  if (!v.is_boolean()) throw Error(ErrorCode::InvalidConfig, where + " must be a boolean");
  return v.get<bool>();
}

inline std::string string_of(const Json& v, const std::string& where) {
  if (!v.is_string()) throw Error(ErrorCode::InvalidConfig, where + " must be a string");
  return v.get<std::string>();
}

inline const Json& array_of(const Json& v, const std::string& where) {
  if (!v.is_array()) throw Error(ErrorCode::InvalidConfig, where + " must be an array");
  return v;
}

inline std::vector<Rational> rationals_of(const Json& v, const std::string& where) {
  std::vector<Rational> out;
  for (const auto& x : array_of(v, where)) out.push_back(rational_of(x, where));
  return out;
}

inline std::vector<int> ints_of(const Json& v, const std::string& where) {
  std::vector<int> out;
  for (const auto& x : array_of(v, where)) out.push_back(int_of(x, where));
  return out;
}

inline void range_of(const Json& v, const std::string& where, int& lo, int& hi) {
  const auto r = ints_of(v, where);
  if (r.size() != 2 || r[0] < 1 || r[1] < r[0]) throw Error(ErrorCode::InvalidConfig, where + " must be [lo, hi]");
  lo = r[0];
  hi = r[1];
}

inline FlowParams parse_flow(const Json& j, const std::string& where) {
  only_keys(j, where, {"n_schedule", "spacer", "h1", "w1", "mode", "max_stage", "bit_budget", "require_growth"});
  FlowParams p;
  if (!j.contains("n_schedule")) throw Error(ErrorCode::InvalidConfig, where + ".n_schedule is required");
  p.n_schedule = ints_of(j["n_schedule"], where + ".n_schedule");
  if (j.contains("spacer")) {
    const auto& s = j["spacer"];
    only_keys(s, where + ".spacer", {"kind", "value", "table", "offset_h"});
    const std::string kind = s.contains("kind") ? string_of(s["kind"], where + ".spacer.kind") : "constant";
    if (kind == "constant")
      p.spacer.kind = SpacerKind::constant;
    else if (kind == "staircase")
      p.spacer.kind = SpacerKind::staircase;
    else if (kind == "custom")
      p.spacer.kind = SpacerKind::custom;
    else
      throw Error(ErrorCode::InvalidConfig, where + ".spacer.kind must be constant, staircase or custom");
    if (s.contains("value")) p.spacer.value = rational_of(s["value"], where + ".spacer.value");
    if (s.contains("table"))
      for (const auto& row : array_of(s["table"], where + ".spacer.table"))
        p.spacer.table.push_back(rationals_of(row, where + ".spacer.table"));
    if (p.spacer.kind == SpacerKind::custom && p.spacer.table.empty())
      throw Error(ErrorCode::InvalidConfig, where + ".spacer.table is required for custom spacers");
    if (s.contains("offset_h")) p.spacer.offset_h = bool_of(s["offset_h"], where + ".spacer.offset_h");
  }
  if (j.contains("h1")) p.h1 = rational_of(j["h1"], where + ".h1");
  if (j.contains("w1")) p.w1 = rational_of(j["w1"], where + ".w1");
  if (j.contains("mode")) {
    const auto m = string_of(j["mode"], where + ".mode");
    if (m == "probability")
      p.mode = MeasureMode::probability;
    else if (m == "sigma_finite")
      p.mode = MeasureMode::sigma_finite;
    else
      throw Error(ErrorCode::InvalidConfig, where + ".mode must be probability or sigma_finite");
  }
  if (j.contains("max_stage")) p.max_stage = int_of(j["max_stage"], where + ".max_stage");
  if (j.contains("bit_budget")) p.bit_budget = int_of(j["bit_budget"], where + ".bit_budget");
  if (j.contains("require_growth")) p.require_growth = bool_of(j["require_growth"], where + ".require_growth");
  return p;
}

inline std::vector<LevelSpec> parse_levels(const Json& v, const std::string& where) {
  std::vector<LevelSpec> out;
  for (const auto& x : array_of(v, where)) {
    only_keys(x, where + "[]", {"lo", "hi", "coeff"});
    if (!x.contains("lo") || !x.contains("hi")) throw Error(ErrorCode::InvalidConfig, where + " entries need lo and hi");
    LevelSpec l{rational_of(x["lo"], where + ".lo"), rational_of(x["hi"], where + ".hi"),
                x.contains("coeff") ? rational_of(x["coeff"], where + ".coeff") : Rational(1)};
    out.push_back(l);
  }
  return out;
}

inline ShiftExpr parse_shift(const Json& v, const std::string& where) {
  if (!v.is_string()) return {Rational(0), rational_of(v, where)};
  std::string s = v.get<std::string>();
  const auto u = s.find('u');
  if (u == std::string::npos) return {Rational(0), rational_of(v, where)};
  std::string head = s.substr(0, u), tail = s.substr(u + 1);
  Rational c(1);
  if (head == "-")
    c = -1;
  else if (!head.empty() && head != "+")
    c = rational_of(Json(head), where);
  if (!tail.empty()) {
    if (tail[0] != '/') throw Error(ErrorCode::InvalidConfig, where + ": shift must look like [p]u[/q]");
    const Rational q = rational_of(Json(tail.substr(1)), where);
    if (q == 0) throw Error(ErrorCode::InvalidConfig, where + ": division by zero");
    c /= q;
  }
  return {c, Rational(0)};
}

inline double double_of(const Json& v, const std::string& where) { return to_double(rational_of(v, where)); }

}  // namespace detail

inline ExperimentConfig parse_config(const Json& doc) {
  using namespace detail;
  only_keys(doc, "config",
            {"experiment", "flow", "probe", "limits", "tensor", "sym", "cyclic", "metric", "thresholds", "output"});
  ExperimentConfig c;
  c.canonical = doc;
  if (doc.contains("experiment")) {
    only_keys(doc["experiment"], "experiment", {"name"});
    if (doc["experiment"].contains("name")) c.name = string_of(doc["experiment"]["name"], "experiment.name");
  }
  if (!doc.contains("flow")) throw Error(ErrorCode::InvalidConfig, "flow section is required");
  c.flow = parse_flow(doc["flow"], "flow");

  if (doc.contains("probe")) {
    const auto& p = doc["probe"];
    only_keys(p, "probe", {"stage", "f", "g", "base"});
    if (p.contains("stage")) c.probe.stage = int_of(p["stage"], "probe.stage");
    if (p.contains("f")) c.probe.f = parse_levels(p["f"], "probe.f");
    if (p.contains("g")) c.probe.g = parse_levels(p["g"], "probe.g");
    if (p.contains("base")) c.probe.base = parse_levels(p["base"], "probe.base");
  }
  if (doc.contains("limits")) {
    const auto& l = doc["limits"];
    only_keys(l, "limits", {"alpha_list", "beta", "epsilon", "samples_per_stage", "stage_range", "depth",
                            "cluster_tol", "grid_radius"});
    if (l.contains("alpha_list")) c.limits.alpha_list = rationals_of(l["alpha_list"], "limits.alpha_list");
    if (l.contains("beta")) c.limits.beta = rational_of(l["beta"], "limits.beta");
    if (l.contains("epsilon")) c.limits.epsilon = rational_of(l["epsilon"], "limits.epsilon");
    if (l.contains("samples_per_stage")) c.limits.samples_per_stage = int_of(l["samples_per_stage"], "limits.samples_per_stage");
    if (l.contains("stage_range")) range_of(l["stage_range"], "limits.stage_range", c.limits.stage_lo, c.limits.stage_hi);
    if (l.contains("depth")) c.limits.depth = int_of(l["depth"], "limits.depth");
    if (l.contains("cluster_tol")) c.limits.cluster_tol = rational_of(l["cluster_tol"], "limits.cluster_tol");
    if (l.contains("grid_radius")) c.limits.grid_radius = int_of(l["grid_radius"], "limits.grid_radius");
    if (c.limits.depth < 0) throw Error(ErrorCode::InvalidConfig, "limits.depth must be non-negative");
    if (c.limits.grid_radius < 0) throw Error(ErrorCode::InvalidConfig, "limits.grid_radius must be non-negative");
  }
  if (doc.contains("tensor")) {
    const auto& t = doc["tensor"];
    only_keys(t, "tensor", {"alphas", "n", "stage_range", "u_mode", "u_fixed"});
    if (t.contains("alphas")) c.tensor.alphas = rationals_of(t["alphas"], "tensor.alphas");
    if (t.contains("n")) c.tensor.n = int_of(t["n"], "tensor.n");
    if (t.contains("stage_range")) range_of(t["stage_range"], "tensor.stage_range", c.tensor.stage_lo, c.tensor.stage_hi);
    if (t.contains("u_mode")) {
      const auto m = string_of(t["u_mode"], "tensor.u_mode");
      if (m == "estimate")
        c.tensor.u_mode = UMode::estimate;
      else if (m == "fixed")
        c.tensor.u_mode = UMode::fixed;
      else
        throw Error(ErrorCode::InvalidConfig, "tensor.u_mode must be estimate or fixed");
    }
    if (t.contains("u_fixed")) c.tensor.u_fixed = rational_of(t["u_fixed"], "tensor.u_fixed");
    if (!c.tensor.alphas.empty() && static_cast<int>(c.tensor.alphas.size()) != c.tensor.n)
      throw Error(ErrorCode::InvalidConfig, "tensor.alphas must have tensor.n entries");
  }
  if (doc.contains("sym")) {
    const auto& s = doc["sym"];
    only_keys(s, "sym", {"truncation_N", "multi_index", "stage", "times", "scale"});
    if (s.contains("truncation_N")) {
      const int n = int_of(s["truncation_N"], "sym.truncation_N");
      if (n < 0) throw Error(ErrorCode::InvalidConfig, "sym.truncation_N must be non-negative");
      c.sym.truncation_N = static_cast<unsigned>(n);
    }
    if (s.contains("multi_index"))
      for (int m : ints_of(s["multi_index"], "sym.multi_index")) {
        if (m < 0) throw Error(ErrorCode::InvalidConfig, "sym.multi_index entries must be non-negative");
        c.sym.multi_index.push_back(static_cast<unsigned>(m));
      }
    if (s.contains("stage")) c.sym.stage = int_of(s["stage"], "sym.stage");
    if (s.contains("times")) c.sym.times = rationals_of(s["times"], "sym.times");
    if (s.contains("scale")) c.sym.scale = rational_of(s["scale"], "sym.scale");
  }
  if (doc.contains("cyclic")) {
    const auto& y = doc["cyclic"];
    only_keys(y, "cyclic", {"K_list", "stage", "targets", "tol_rank", "tol_psd", "in_span_power"});
    if (y.contains("K_list")) c.cyclic.K_list = ints_of(y["K_list"], "cyclic.K_list");
    for (int K : c.cyclic.K_list)
      if (K < 0) throw Error(ErrorCode::InvalidConfig, "cyclic.K_list entries must be non-negative");
    if (y.contains("stage")) c.cyclic.stage = int_of(y["stage"], "cyclic.stage");
    if (y.contains("targets"))
      for (const auto& tv : array_of(y["targets"], "cyclic.targets")) {
        std::vector<ShiftExpr> row;
        for (const auto& e : array_of(tv, "cyclic.targets[]")) row.push_back(parse_shift(e, "cyclic.targets"));
        c.cyclic.targets.push_back(row);
      }
    if (y.contains("tol_rank")) c.cyclic.tol_rank = double_of(y["tol_rank"], "cyclic.tol_rank");
    if (y.contains("tol_psd")) c.cyclic.tol_psd = double_of(y["tol_psd"], "cyclic.tol_psd");
    if (y.contains("in_span_power")) c.cyclic.in_span_power = int_of(y["in_span_power"], "cyclic.in_span_power");
  }
  if (doc.contains("metric")) {
    const auto& m = doc["metric"];
    only_keys(m, "metric", {"grid_step", "basis_count", "stage", "flows", "random_triples", "seed"});
    if (m.contains("grid_step")) c.metric.grid_step = rational_of(m["grid_step"], "metric.grid_step");
    if (m.contains("basis_count")) c.metric.basis_count = int_of(m["basis_count"], "metric.basis_count");
    if (m.contains("stage")) c.metric.stage = int_of(m["stage"], "metric.stage");
    if (m.contains("flows"))
      for (const auto& f : array_of(m["flows"], "metric.flows")) c.metric.flows.push_back(parse_flow(f, "metric.flows[]"));
    if (m.contains("random_triples")) c.metric.random_triples = int_of(m["random_triples"], "metric.random_triples");
    if (m.contains("seed")) c.metric.seed = static_cast<std::uint64_t>(int_of(m["seed"], "metric.seed"));
  }
  if (doc.contains("thresholds")) {
    const auto& t = doc["thresholds"];
    only_keys(t, "thresholds", {"in_span_residual", "solver_tolerance", "trend_window"});
    if (t.contains("in_span_residual")) c.thresholds.in_span_residual = rational_of(t["in_span_residual"], "thresholds.in_span_residual");
    if (t.contains("solver_tolerance")) c.thresholds.solver_tolerance = rational_of(t["solver_tolerance"], "thresholds.solver_tolerance");
    if (t.contains("trend_window")) c.thresholds.trend_window = int_of(t["trend_window"], "thresholds.trend_window");
    if (c.thresholds.trend_window < 2) throw Error(ErrorCode::InvalidConfig, "thresholds.trend_window must be at least 2");
  }
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    only_keys(o, "output", {"format", "path"});
    if (o.contains("format")) c.format = string_of(o["format"], "output.format");
    if (o.contains("path")) c.path = string_of(o["path"], "output.path");
    if (c.format != "json" && c.format != "csv") throw Error(ErrorCode::InvalidConfig, "output.format must be json or csv");
  }
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

}  // namespace tsflow
