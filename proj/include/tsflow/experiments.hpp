#pragma once

// Experiment orchestration behind the command-line tool.  Each subcommand
// appends records to a report; checks with a verdict set `pass`, tables leave
// it empty.  Exit codes: 0 all pass, 2 some check failed, 1 configuration or
// arithmetic error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "tsflow/config.hpp"
#include "tsflow/correlator.hpp"
#include "tsflow/cyclic.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/limits.hpp"
#include "tsflow/metric.hpp"
#include "tsflow/report.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

inline constexpr const char* kToolName = "tsflow";
inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
  int threads = 1;
  std::optional<int> stage_max;
  bool timestamp = false;
};

struct RunResult {
  Report report;
  int exit_code = 0;
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"build", "rigidity", "middle", "special", "theorem", "exp", "metric", "all"};
  return s;
}

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

inline std::string join_rationals(const std::vector<Rational>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_string(v[i]);
  return s + ")";
}

inline std::string pattern_string(const LimitTerm& t) {
  std::string s;
  for (std::size_t k = 0; k < t.pattern.size(); ++k) s += (k ? "(x)" : "") + to_string(t.pattern[k]);
  return to_string(t.coeff) + "*" + s;
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const RunOptions& opts, Report& report)
      : cfg_(cfg), opts_(opts), report_(report) {
    FlowParams p = cfg.flow;
    if (opts.stage_max) {
      if (*opts.stage_max < 1) throw Error(ErrorCode::InvalidConfig, "--stage-max must be positive");
      p.max_stage = std::min(p.stage_count(), *opts.stage_max);
    }
    flow_.emplace(p);
  }

  void run(const std::string& sub) {
    if (sub == "build") build();
    else if (sub == "rigidity") rigidity();
    else if (sub == "middle") middle();
    else if (sub == "special") special();
    else if (sub == "theorem") theorem();
    else if (sub == "exp") exp();
    else if (sub == "metric") metric();
    else throw Error(ErrorCode::InvalidArgument, "unknown subcommand " + sub);
  }

 private:
  const Flow& flow() const { return *flow_; }

  StepFunction step(const std::vector<LevelSpec>& levels, const char* name, Rational scale = Rational(1)) const {
    if (levels.empty()) throw Error(ErrorCode::InvalidConfig, std::string("probe.") + name + " is required");
    std::vector<StepTerm> terms;
    for (const auto& l : levels) terms.push_back({{cfg_.probe.stage, l.lo, l.hi}, l.coeff * scale});
    return StepFunction(cfg_.probe.stage, terms);
  }

  // Stages that have a cut, clipped to what was constructed.
  std::pair<int, int> cut_range(int lo, int hi) const {
    hi = std::min(hi, flow().stage_count() - 1);
    if (hi < lo) throw Error(ErrorCode::UnknownStage, "stage range has no constructed cut");
    return {lo, hi};
  }

  int window(std::size_t available) const {
    return static_cast<int>(std::min<std::size_t>(available, static_cast<std::size_t>(cfg_.thresholds.trend_window)));
  }

  // Certified comparison over the last `trend_window` rows.
  void trend(const std::string& id, const std::vector<CorrelationInterval>& ys, const std::vector<int>& stages,
             bool strict) {
    const int w = window(ys.size());
    auto& rec = report_.add(id);
    rec.param("window", std::to_string(w)).param("relation", strict ? "strictly_decreasing" : "non_increasing");
    bool ok = w >= 2;
    std::string seq;
    const std::size_t start = ys.size() - static_cast<std::size_t>(w);
    for (std::size_t i = start; i < ys.size(); ++i) {
      seq += (seq.empty() ? "" : ";") + std::to_string(stages[i]) + ":" + format_double(to_double(ys[i].mid()));
      if (i == start) continue;
      const auto& prev = ys[i - 1];
      const auto& cur = ys[i];
      ok = ok && (strict ? cur.hi < prev.lo : cur.lo <= prev.hi);
    }
    rec.val(seq).verdict(ok);
  }

  void build() {
    const Rational total = flow().stages().back().mu;
    for (const auto& s : flow().stages()) {
      auto& r = report_.add("build.stage", s.j);
      r.val(s.h).extra("h", s.h).extra("w", s.w).extra("mu", s.mu).extra("spacer_mass", s.spacer_mass);
      if (flow().params().mode == MeasureMode::probability) r.extra("mu_normalized", s.mu / total);
    }
    for (int j = 1; j < flow().stage_count(); ++j) {
      const int r = flow().cuts(j);
      const bool holds = Rational(r) > pow(flow().stage(j).h, static_cast<unsigned>(j));
      auto& rec = report_.add("build.admissibility", j);
      rec.param("r", std::to_string(r)).param("h", flow().stage(j).h).val(holds ? "true" : "false");
      if (flow().params().require_growth) rec.verdict(holds);
    }
    const bool mono = [&] {
      for (int j = 1; j < flow().stage_count(); ++j)
        if (!(flow().stage(j + 1).mu > flow().stage(j).mu)) return false;
      return true;
    }();
    bool positive = true;
    for (int j = 1; j < flow().stage_count(); ++j)
      for (const auto& s : flow().spacers(j)) positive = positive && s > 0;
    if (flow().params().mode == MeasureMode::sigma_finite && positive && flow().stage_count() > 1)
      report_.add("build.mu_increasing").val(mono ? "true" : "false").verdict(mono);
  }

  void rigidity() {
    const auto f = step(cfg_.probe.f, "f");
    const auto [lo, hi] = cut_range(cfg_.limits.stage_lo, cfg_.limits.stage_hi);
    const auto rows = check_rigidity(flow(), f, lo, hi, cfg_.limits.depth, opts_.threads);
    const Rational bound = 4 * norm_sq(flow(), f);
    std::vector<CorrelationInterval> rel;
    std::vector<int> stages;
    for (const auto& r : rows) {
      auto& rec = report_.add("rigidity.defect", r.j);
      rec.param("t", r.t).param("J", std::to_string(r.J)).bounds(r.defect).val(format_double(to_double(r.relative.mid())));
      rec.extra("relative_lo", r.relative.lo).extra("relative_hi", r.relative.hi);
      rec.verdict(r.defect.lo >= 0 && r.defect.hi <= bound);
      rel.push_back(r.relative);
      stages.push_back(r.j);
    }
    trend("rigidity.trend", rel, stages, true);
  }

  void middle() {
    const auto f = step(cfg_.probe.f, "f");
    const auto g = step(cfg_.probe.g, "g");
    MiddleDecaySpec spec;
    spec.epsilon = cfg_.limits.epsilon;
    spec.samples = cfg_.limits.samples_per_stage;
    std::tie(spec.j_lo, spec.j_hi) = cut_range(cfg_.limits.stage_lo, cfg_.limits.stage_hi);
    spec.depth = cfg_.limits.depth;
    const auto rows = check_middle_decay(flow(), f, g, spec, opts_.threads);
    std::vector<CorrelationInterval> ys;
    std::vector<int> stages;
    for (const auto& r : rows) {
      auto& rec = report_.add("middle.max", r.j);
      rec.param("epsilon", spec.epsilon).param("samples", std::to_string(spec.samples)).param("J", std::to_string(r.J));
      rec.bounds(r.max_abs).val(format_double(to_double(r.max_abs.hi)));
      rec.extra("R", r.R).extra("argmax", r.argmax);
      ys.push_back(r.max_abs);
      stages.push_back(r.j);
    }
    trend("middle.trend", ys, stages, true);
  }

  Rational cluster_tol(const Rational& alpha) const {
    return cfg_.limits.cluster_tol ? *cfg_.limits.cluster_tol : alpha / 100;
  }

  // Lacunary schedule of alpha over the limits stage range, recorded.
  LacunarySchedule lacunary(const Rational& alpha, const std::string& prefix) {
    const auto [lo, hi] = cut_range(cfg_.limits.stage_lo, cfg_.limits.stage_hi);
    auto sched = lacunary_indices(alpha, flow(), lo, hi);
    for (const auto& e : sched.entries) {
      auto& rec = report_.add(prefix + ".lacunary", e.j);
      rec.param("alpha", alpha).val(e.n.str()).extra("time", e.time).extra("defect", e.defect);
      rec.verdict(abs(e.defect) <= alpha / 2);
    }
    return sched;
  }

  // Returns u_hat, or nothing when the defects refuse to cluster.
  std::optional<Rational> estimate(const LacunarySchedule& sched, const std::string& prefix) {
    auto& rec = report_.add(prefix + ".u_estimate");
    rec.param("alpha", sched.alpha).param("tolerance", cluster_tol(sched.alpha));
    try {
      const auto est = estimate_u(sched, cluster_tol(sched.alpha));
      rec.val(est.u_hat).extra("members", join_ints(est.members)).verdict(true);
      return est.u_hat;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoStableCluster) throw;
      rec.val("none").extra("error", to_string(e.code())).verdict(false);
      return std::nullopt;
    }
  }

  void special() {
    const auto f = step(cfg_.probe.f, "f");
    const auto g = step(cfg_.probe.g, "g");
    if (cfg_.limits.alpha_list.empty()) throw Error(ErrorCode::InvalidConfig, "limits.alpha_list is empty");
    const Rational total = alpha_sum(cfg_.limits.alpha_list);
    const auto sched = lacunary(total, "special");
    if (const auto u = estimate(sched, "special")) {
      for (const auto& r : u_convergence(flow(), f, g, sched, *u, cfg_.limits.depth, opts_.threads)) {
        auto& rec = report_.add("special.u_convergence", r.j);
        rec.param("n", r.n.str()).param("J", std::to_string(r.J)).bounds(r.deviation);
        rec.val(format_double(to_double(r.deviation.hi)));
      }
    }
    SpecialLimitSpec spec;
    spec.beta = cfg_.limits.beta;
    spec.alphas = cfg_.limits.alpha_list;
    std::tie(spec.j_lo, spec.j_hi) = cut_range(cfg_.limits.stage_lo, cfg_.limits.stage_hi);
    spec.depth = cfg_.limits.depth;
    for (const auto& r : check_special_limit(flow(), f, g, spec, opts_.threads)) {
      auto& rec = report_.add("special.deviation", r.j);
      rec.param("beta", spec.beta).param("n", r.n.str()).param("J", std::to_string(r.J));
      rec.bounds(r.max_deviation).val(format_double(to_double(r.max_deviation.hi)));
      rec.extra("target_lo", r.target.lo).extra("target_hi", r.target.hi);
      for (std::size_t k = 0; k < r.deviation.size(); ++k)
        rec.extra("alpha_" + std::to_string(k + 1) + "_hi", r.deviation[k].hi);
    }
    const auto gs = grid_search_n(flow(), f, g, spec, spec.j_hi, cfg_.limits.grid_radius, opts_.threads);
    auto& rec = report_.add("special.grid_search", spec.j_hi);
    rec.param("radius", std::to_string(cfg_.limits.grid_radius)).val(gs.matches_center ? "match" : "differs");
    rec.extra("best_n", gs.best_n.str()).extra("lacunary_n", gs.center_n.str()).extra("best_upper", gs.best_upper);
  }

  void theorem() {
    const auto& alphas = cfg_.tensor.alphas;
    if (alphas.empty()) throw Error(ErrorCode::InvalidConfig, "tensor.alphas is empty");
    const std::size_t n = alphas.size();
    const auto expansion = expand_qj(alphas);
    const std::size_t want = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(n - 1)));
    for (std::size_t k = 0; k < n; ++k) {
      Rational sum(0);
      bool positive = true;
      for (const auto& t : expansion[k]) {
        sum += t.coeff;
        positive = positive && t.coeff > 0;
      }
      auto& rec = report_.add("theorem.expansion");
      rec.param("factor", std::to_string(k + 1)).val(std::to_string(expansion[k].size())).extra("coeff_sum", sum);
      rec.verdict(expansion[k].size() == want && sum == 1 && positive);
    }
    const auto pred = predict_limit(alphas);
    report_.add("theorem.exclusions").val(pred.exclusions_hold ? "true" : "false").verdict(pred.exclusions_hold);
    const auto relations = detect_relations(alphas);
    {
      auto& rec = report_.add("theorem.relations");
      rec.param("alphas", join_rationals(alphas)).val(std::to_string(relations.size()));
      for (std::size_t i = 0; i < relations.size(); ++i) rec.extra("d_" + std::to_string(i + 1), join_ints(relations[i]));
    }
    {
      auto& rec = report_.add("theorem.prediction");
      rec.param("n", std::to_string(n)).val(pred.c_n).extra("b_n", pred.b_n);
      for (std::size_t i = 0; i < pred.terms.size(); ++i)
        rec.extra("term_" + std::to_string(i + 1), pattern_string(pred.terms[i]));
      const bool b_ok = (pred.b_n > 0) == !relations.empty();
      const bool anchor = n != 2 || pred.c_n == Rational(1, 16);
      rec.verdict(pred.c_n > 0 && b_ok && anchor);
    }

    // u along the lacunary sequence of sum(alpha)
    const Rational total = alpha_sum(alphas);
    const auto [lo, hi] = cut_range(cfg_.tensor.stage_lo, cfg_.tensor.stage_hi);
    std::vector<std::pair<int, Rational>> times;
    for (int j = lo; j <= hi; ++j) times.emplace_back(j, flow().return_time(j));
    const auto sched = lacunary_indices(total, times);
    std::optional<Rational> u;
    if (cfg_.tensor.u_mode == UMode::fixed) {
      u = cfg_.tensor.u_fixed;
      report_.add("theorem.u").param("mode", "fixed").val(*u);
    } else {
      u = estimate(sched, "theorem");
    }
    if (!u) return;

    const auto base = step(cfg_.probe.base, "base");
    const auto F = ElementaryTensor::power(base, n);
    const Rational scale = pow(norm_sq(flow(), base), static_cast<unsigned>(n));
    std::vector<CorrelationInterval> devs;
    std::vector<int> stages;
    const auto rows = parallel_map(
        sched.entries.size(),
        [&](std::size_t i) {
          const auto& e = sched.entries[i];
          const int J = refinement_stage(flow(), e.j, cfg_.limits.depth);
          const auto q = evaluate_qj(flow(), alphas, e.n, F, F, J);
          const auto l = evaluate_prediction(flow(), pred, *u, F, F, J);
          return std::make_tuple(J, q, l);
        },
        opts_.threads);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& [J, q, l] = rows[i];
      const auto dev = abs_range(q - l) / scale;
      auto& rec = report_.add("theorem.qj", sched.entries[i].j);
      rec.param("n_j", sched.entries[i].n.str()).param("J", std::to_string(J)).bounds(q);
      rec.val(format_double(to_double(dev.hi)));
      rec.extra("limit_lo", l.lo).extra("limit_hi", l.hi).extra("relative_deviation_lo", dev.lo).extra("relative_deviation_hi", dev.hi);
      devs.push_back(dev);
      stages.push_back(sched.entries[i].j);
    }
    trend("theorem.qj_trend", devs, stages, false);
    cyclic(*u);
  }

  void cyclic(const Rational& u) {
    const auto& alphas = cfg_.tensor.alphas;
    const std::size_t n = alphas.size();
    const int J = std::min(cfg_.cyclic.stage, flow().stage_count());
    const auto f = step(cfg_.probe.f, "f");
    const auto F = ElementaryTensor::power(f, n);
    const double tol = to_double(cfg_.thresholds.solver_tolerance);
    for (std::size_t ti = 0; ti < cfg_.cyclic.targets.size(); ++ti) {
      const auto& te = cfg_.cyclic.targets[ti];
      if (te.size() != n) throw Error(ErrorCode::ArityMismatch, "cyclic target arity differs from tensor.n");
      ElementaryTensor target;
      std::string label;
      for (const auto& s : te) {
        target.factors.push_back({f, s.eval(u)});
        label += (label.empty() ? "" : ";") + to_string(s.eval(u));
      }
      std::optional<CyclicResidual> prev;
      bool mono = true;
      for (int K : cfg_.cyclic.K_list) {
        const auto r = cyclic_residual(flow(), alphas, F, target, K, J, cfg_.cyclic.tol_rank, opts_.threads);
        auto& rec = report_.add("theorem.cyclic_residual", J);
        rec.param("target", label).param("K", std::to_string(K)).val(format_double(r.relative()));
        rec.extra("rank", std::to_string(r.rank)).extra("slack", format_double(r.slack));
        if (prev) mono = mono && r.residual_sq <= prev->residual_sq + tol * r.target_norm_sq + r.slack + prev->slack;
        prev = r;
      }
      report_.add("theorem.cyclic_monotone", J).param("target", label).val(mono ? "true" : "false").verdict(mono);
    }
    const int m = cfg_.cyclic.in_span_power;
    const double limit = to_double(cfg_.thresholds.in_span_residual);
    for (int K : cfg_.cyclic.K_list) {
      if (std::abs(m) > K) continue;
      ElementaryTensor target;
      for (const auto& a : alphas) target.factors.push_back({f, a * Rational(m)});
      const auto r = cyclic_residual(flow(), alphas, F, target, K, J, cfg_.cyclic.tol_rank, opts_.threads);
      auto& rec = report_.add("theorem.cyclic_in_span", J);
      rec.param("power", std::to_string(m)).param("K", std::to_string(K)).val(format_double(r.relative()));
      rec.verdict(r.relative() <= limit);
    }
    if (!cfg_.cyclic.K_list.empty()) {
      const int K = *std::max_element(cfg_.cyclic.K_list.begin(), cfg_.cyclic.K_list.end());
      const auto g = krylov_gram(flow(), alphas, F, K, J, opts_.threads);
      const auto psd = check_psd(g, cfg_.cyclic.tol_psd);
      auto& rec = report_.add("theorem.gram_psd", J);
      rec.param("K", std::to_string(K)).val(format_double(psd.min_eigenvalue)).extra("floor", format_double(psd.floor));
      rec.verdict(psd.passes);
      auto& rk = report_.add("theorem.cyclic_rank", J);
      rk.param("K", std::to_string(K)).param("tol_rank", format_double(cfg_.cyclic.tol_rank));
      rk.val(std::to_string(cyclic_dimension_estimate(g, cfg_.cyclic.tol_rank)));
      rk.extra("dimension", std::to_string(g.dimension()));
    }
  }

  void exp() {
    // f = g: the diagonal coefficients of the Fock exponential
    const auto f = step(cfg_.probe.f, "f", cfg_.sym.scale);
    const auto& g = f;
    const int J = std::min(cfg_.sym.stage, flow().stage_count());
    const unsigned N = cfg_.sym.truncation_N;
    for (const auto& t : cfg_.sym.times) {
      const auto c = correlate(flow(), f, g, t, J);
      const auto lo = exp_correlate_from(c, norm_sq(flow(), f), norm_sq(flow(), g), N);
      const auto hi = exp_correlate_from(c, norm_sq(flow(), f), norm_sq(flow(), g), N + 2);
      auto& rec = report_.add("exp.correlation", J);
      rec.param("t", t).param("N", std::to_string(N)).bounds(lo.enclosure).val(format_double(to_double(lo.enclosure.mid())));
      rec.extra("tail", lo.tail).extra("norm_product_upper", lo.norm_product_upper);
      const bool nested = lo.enclosure.contains(hi.enclosure);
      auto& nr = report_.add("exp.nested", J);
      nr.param("t", t).param("N", std::to_string(N) + ";" + std::to_string(N + 2)).bounds(hi.enclosure);
      nr.val(nested ? "true" : "false").verdict(nested);
      if (!cfg_.sym.multi_index.empty()) {
        std::vector<int> mi(cfg_.sym.multi_index.begin(), cfg_.sym.multi_index.end());
        auto& pr = report_.add("exp.product_power", J);
        const auto p = product_power_correlate(c, cfg_.sym.multi_index);
        pr.param("t", t).param("multi_index", join_ints(mi)).bounds(p).val(format_double(to_double(p.mid())));
      }
    }
  }

  void metric() {
    const auto& mc = cfg_.metric;
    if (mc.flows.size() < 2) throw Error(ErrorCode::InvalidConfig, "metric.flows needs at least two flows");
    std::vector<Flow> flows;
    for (const auto& p : mc.flows) flows.emplace_back(p);
    for (std::size_t i = 1; i < flows.size(); ++i) check_compatible(flows[0], flows[i]);
    const int J = std::min(mc.stage, flows[0].stage_count());
    const auto basis = default_basis(flows[0], mc.basis_count);
    {
      auto& rec = report_.add("metric.basis");
      rec.param("count", std::to_string(basis.sets.size())).val(basis.tail).extra("lipschitz", basis.lipschitz);
    }
    const std::size_t m = flows.size();
    std::map<std::pair<std::size_t, std::size_t>, MetricEstimate> d;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b) continue;
        d[{a, b}] = metric_d(flows[a], flows[b], mc.grid_step, basis, J, opts_.threads);
        const auto r0 = rho(flows[a], flows[b], Rational(0), basis, J);
        if (a < b) {
          auto& z = report_.add("metric.rho_zero", J);
          z.param("pair", std::to_string(a) + ";" + std::to_string(b)).bounds(r0).verdict(r0.lo == 0 && r0.hi == 0);
        }
      }
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        const auto& x = d[{a, b}];
        const auto& y = d[{b, a}];
        auto& rec = report_.add("metric.d", J);
        rec.param("pair", std::to_string(a) + ";" + std::to_string(b)).bounds({x.lower, x.upper});
        rec.val(format_double(to_double(x.upper))).extra("argmax", x.argmax);
        rec.verdict(x.lower == y.lower && x.upper == y.upper);
      }
    auto audit = [&](const std::string& id, const std::vector<const Flow*>& fs,
                     const std::function<MetricEstimate(std::size_t, std::size_t)>& get) {
      for (std::size_t a = 0; a < fs.size(); ++a)
        for (std::size_t b = 0; b < fs.size(); ++b)
          for (std::size_t c = 0; c < fs.size(); ++c) {
            if (a == b || b == c || a == c) continue;
            const auto ab = get(a, b), bc = get(b, c), ac = get(a, c);
            const Rational slack = (ab.upper - ab.lower) + (bc.upper - bc.lower) + (ac.upper - ac.lower);
            const Rational lhs = ac.upper, rhs = ab.lower + bc.lower + slack;
            auto& rec = report_.add(id, J);
            rec.param("triple", std::to_string(a) + ";" + std::to_string(b) + ";" + std::to_string(c));
            rec.val(format_double(to_double(rhs - lhs))).verdict(lhs <= rhs);
          }
    };
    std::vector<const Flow*> ptrs;
    for (const auto& f : flows) ptrs.push_back(&f);
    audit("metric.triangle", ptrs, [&](std::size_t a, std::size_t b) { return d.at({a, b}); });

    // randomized triples around the first flow
    std::mt19937_64 rng(mc.seed);
    bool all_ok = true;
    for (int t = 0; t < mc.random_triples; ++t) {
      std::vector<Flow> trip;
      for (int k = 0; k < 3; ++k) trip.emplace_back(perturbed(mc.flows[0], rng));
      std::map<std::pair<std::size_t, std::size_t>, MetricEstimate> dd;
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          if (a != b) dd[{a, b}] = metric_d(trip[a], trip[b], mc.grid_step, basis, J, opts_.threads);
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
          for (std::size_t c = 0; c < 3; ++c) {
            if (a == b || b == c || a == c) continue;
            const auto &ab = dd.at({a, b}), &bc = dd.at({b, c}), &ac = dd.at({a, c});
            const Rational slack = (ab.upper - ab.lower) + (bc.upper - bc.lower) + (ac.upper - ac.lower);
            all_ok = all_ok && ac.upper <= ab.lower + bc.lower + slack;
          }
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a + 1; b < 3; ++b)
          all_ok = all_ok && dd.at({a, b}).lower == dd.at({b, a}).lower && dd.at({a, b}).upper == dd.at({b, a}).upper;
    }
    auto& rec = report_.add("metric.random_triangle", J);
    rec.param("triples", std::to_string(mc.random_triples)).param("seed", std::to_string(mc.seed));
    rec.val(all_ok ? "true" : "false").verdict(all_ok);
  }

 public:
  // Random custom spacers in {0, 1/2, ..., 2} on the cut counts of `base`.
  static FlowParams perturbed(const FlowParams& base, std::mt19937_64& rng) {
    FlowParams p = base;
    p.spacer = SpacerRule{};
    p.spacer.kind = SpacerKind::custom;
    for (int j = 1; j < p.stage_count(); ++j) {
      std::vector<Rational> row;
      for (int i = 0; i < p.cuts(j); ++i) row.push_back(Rational(static_cast<long long>(rng() % 5), 2));
      p.spacer.table.push_back(row);
    }
    return p;
  }

 private:
  const ExperimentConfig& cfg_;
  const RunOptions& opts_;
  Report& report_;
  std::optional<Flow> flow_;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace detail

inline RunResult run(const std::string& sub, const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  RunResult res;
  auto& meta = res.report.metadata;
  meta.emplace_back("tool", kToolName);
  meta.emplace_back("version", kToolVersion);
  meta.emplace_back("experiment", cfg.name);
  meta.emplace_back("subcommand", sub);
  meta.emplace_back("config_hash", fnv1a64(cfg.canonical.dump()));
  if (opts.stage_max) meta.emplace_back("stage_max", std::to_string(*opts.stage_max));
  if (opts.timestamp) meta.emplace_back("timestamp", detail::utc_timestamp());
  try {
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
      throw Error(ErrorCode::InvalidArgument, "unknown subcommand " + sub);
    detail::Runner runner(cfg, opts, res.report);
    if (sub == "all") {
      for (const auto& s : subcommands())
        if (s != "all") runner.run(s);
    } else {
      runner.run(sub);
    }
  } catch (const Error& e) {
    auto& rec = res.report.add(sub + ".error");
    rec.param("code", to_string(e.code())).val(e.what()).verdict(false);
    res.exit_code = 1;
    return res;
  }
  res.exit_code = res.report.any_failure() ? 2 : 0;
  return res;
}

}  // namespace tsflow
