#pragma once

// Weak-limit checks along the rigidity times of a flow: rigidity defects,
// middle-range decay, lacunary index sequences and special weak limits.
//
// The rigidity time of stage j is the median copy-to-copy return time
// R_j = h_j + s_j(i) (see Flow::return_time).  Checks for stage j are
// evaluated at the refinement stage J = min(j + depth, last stage).

#include <algorithm>
#include <optional>
#include <vector>

#include "tsflow/correlator.hpp"
#include "tsflow/error.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/parallel.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

inline int refinement_stage(const Flow& flow, int j, int depth) {
  return std::min(j + depth, flow.stage_count());
}

// Magnitude range {|x| : x in c}.
inline CorrelationInterval abs_range(const CorrelationInterval& c) { return {c.mig(), c.mag()}; }

struct LacunaryEntry {
  int j = 0;
  Rational time;  // R_j
  BigInt n;
  Rational defect;  // alpha * n - R_j, |defect| <= alpha / 2
};

struct LacunarySchedule {
  Rational alpha;
  std::vector<LacunaryEntry> entries;
};

inline LacunarySchedule lacunary_indices(const Rational& alpha, const std::vector<std::pair<int, Rational>>& times) {
  if (alpha <= 0) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  LacunarySchedule out{alpha, {}};
  int last = 0;
  for (const auto& [j, r] : times) {
    if (!out.entries.empty() && j <= last) throw Error(ErrorCode::InvalidArgument, "stages must increase");
    BigInt n = round_half_even(r / alpha);
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "rigidity time below alpha / 2");
    out.entries.push_back({j, r, n, alpha * Rational(n) - r});
    last = j;
  }
  return out;
}

inline LacunarySchedule lacunary_indices(const Rational& alpha, const Flow& flow, int j_lo, int j_hi) {
  std::vector<std::pair<int, Rational>> times;
  for (int j = j_lo; j <= j_hi; ++j) times.emplace_back(j, flow.return_time(j));
  return lacunary_indices(alpha, times);
}

struct LimitEstimate {
  Rational u_hat;
  Rational tolerance;
  std::vector<int> members;  // stages whose defect lies within tolerance of u_hat
  std::vector<Rational> defects;
};

// Dominant defect cluster.  Each defect is tried as a center; the cluster with
// the most members wins, ties go to the cluster reaching the latest stage and
// then to the latest center.  Fewer than two members is not a cluster.
inline LimitEstimate estimate_u(const LacunarySchedule& schedule, const Rational& tolerance) {
  const auto& e = schedule.entries;
  LimitEstimate est;
  est.tolerance = tolerance;
  for (const auto& x : e) est.defects.push_back(x.defect);
  std::size_t best = e.size();
  std::vector<int> best_members;
  for (std::size_t c = 0; c < e.size(); ++c) {
    std::vector<int> members;
    for (const auto& x : e)
      if (abs(x.defect - e[c].defect) <= tolerance) members.push_back(x.j);
    const bool better = best == e.size() || members.size() > best_members.size() ||
                        (members.size() == best_members.size() && members.back() >= best_members.back());
    if (better) {
      best = c;
      best_members = members;
    }
  }
  if (best == e.size() || best_members.size() < 2)
    throw Error(ErrorCode::NoStableCluster, "defects do not cluster within tolerance " + to_string(tolerance));
  est.u_hat = e[best].defect;
  est.members = best_members;
  return est;
}

struct RigidityRow {
  int j = 0;
  int J = 0;
  Rational t;
  CorrelationInterval defect;    // |T_t f - f|^2
  CorrelationInterval relative;  // defect / |f|^2
};

inline std::vector<RigidityRow> check_rigidity(const Flow& flow, const StepFunction& f, int j_lo, int j_hi,
                                               int depth, int threads = 1) {
  const Rational nf = norm_sq(flow, f);
  if (nf == 0) throw Error(ErrorCode::InvalidArgument, "rigidity probe has zero norm");
  return parallel_map(
      static_cast<std::size_t>(j_hi - j_lo + 1),
      [&](std::size_t i) {
        const int j = j_lo + static_cast<int>(i);
        const int J = refinement_stage(flow, j, depth);
        const Rational t = flow.return_time(j);
        const auto d = rigidity_defect(Probe(flow, f, J), t, nf);
        return RigidityRow{j, J, t, d, d / nf};
      },
      threads);
}

struct MiddleDecaySpec {
  Rational epsilon{1, 4};
  int samples = 17;
  int j_lo = 1;
  int j_hi = 1;
  int depth = 2;
};

// Base-2 radical inverse of k as an exact dyadic rational.
inline Rational van_der_corput(std::uint64_t k) {
  Rational x(0), scale(1, 2);
  for (; k; k >>= 1, scale /= 2)
    if (k & 1u) x += scale;
  return x;
}

// Sample times in [eps R, (1 - eps) R]: both endpoints, then van der Corput points.
inline std::vector<Rational> middle_samples(const Rational& R, const Rational& eps, int count) {
  if (eps <= 0 || eps >= Rational(1, 2)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0, 1/2)");
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "middle decay needs at least two samples");
  std::vector<Rational> xs{Rational(0), Rational(1)};
  for (int k = 1; static_cast<int>(xs.size()) < count; ++k) xs.push_back(van_der_corput(static_cast<std::uint64_t>(k)));
  std::vector<Rational> out;
  for (const auto& x : xs) out.push_back(eps * R + x * (1 - 2 * eps) * R);
  return out;
}

struct MiddleDecayRow {
  int j = 0;
  int J = 0;
  Rational R;
  Rational argmax;  // sample attaining the largest magnitude bound
  CorrelationInterval at_argmax;
  CorrelationInterval max_abs;  // encloses max over samples of |<T_a f, g>|
};

inline std::vector<MiddleDecayRow> check_middle_decay(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                                      const MiddleDecaySpec& spec, int threads = 1) {
  if (flow.params().mode == MeasureMode::probability && (!f.mean_zero() || !g.mean_zero()))
    throw Error(ErrorCode::NotMeanZero, "middle decay in probability mode needs mean-zero probes");
  return parallel_map(
      static_cast<std::size_t>(spec.j_hi - spec.j_lo + 1),
      [&](std::size_t i) {
        MiddleDecayRow row;
        row.j = spec.j_lo + static_cast<int>(i);
        row.J = refinement_stage(flow, row.j, spec.depth);
        row.R = flow.return_time(row.j);
        const Probe pf(flow, f, row.J), pg(flow, g, row.J);
        Rational lo(0), hi(0);
        bool first = true;
        for (const auto& a : middle_samples(row.R, spec.epsilon, spec.samples)) {
          const auto c = correlate(pf, pg, a);
          if (first || c.mag() > hi) {
            hi = c.mag();
            row.argmax = a;
            row.at_argmax = c;
          }
          lo = first ? c.mig() : std::max(lo, c.mig());
          first = false;
        }
        row.max_abs = CorrelationInterval(lo, hi);
        return row;
      },
      threads);
}

struct SpecialLimitSpec {
  Rational beta{0};
  std::vector<Rational> alphas;
  int j_lo = 1;
  int j_hi = 1;
  int depth = 2;
};

// <P(T_beta) f, g> = (<T_beta f, g> + 2 <f, g> + <T_{-beta} f, g>) / 4.
inline CorrelationInterval p_target(const Probe& f, const Probe& g, const Rational& beta) {
  const auto sum = correlate(f, g, beta) + Rational(2) * correlate(f, g, Rational(0)) + correlate(f, g, -beta);
  return sum / Rational(4);
}

struct SpecialRow {
  int j = 0;
  int J = 0;
  BigInt n;
  CorrelationInterval target;
  std::vector<CorrelationInterval> deviation;  // |<T_{alpha_k n} f, g> - target| per alpha
  CorrelationInterval max_deviation;
};

inline Rational alpha_sum(const std::vector<Rational>& alphas) {
  Rational s(0);
  for (const auto& a : alphas) s += a;
  return s;
}

inline SpecialRow special_row(const Probe& f, const Probe& g, const SpecialLimitSpec& spec, int j, const BigInt& n) {
  SpecialRow row;
  row.j = j;
  row.J = f.stage();
  row.n = n;
  row.target = p_target(f, g, spec.beta);
  Rational lo(0), hi(0);
  for (const auto& a : spec.alphas) {
    const auto dev = abs_range(correlate(f, g, a * Rational(n)) - row.target);
    row.deviation.push_back(dev);
    lo = std::max(lo, dev.lo);
    hi = std::max(hi, dev.hi);
  }
  row.max_deviation = CorrelationInterval(lo, hi);
  return row;
}

// n_j from the lacunary sequence of sum(alpha), shared by every alpha_k.
inline std::vector<SpecialRow> check_special_limit(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                                   const SpecialLimitSpec& spec, int threads = 1) {
  if (spec.alphas.empty()) throw Error(ErrorCode::InvalidArgument, "special limit needs alphas");
  for (const auto& a : spec.alphas)
    if (a <= 0) throw Error(ErrorCode::InvalidArgument, "alphas must be positive");
  if (spec.beta < 0) throw Error(ErrorCode::InvalidArgument, "beta must be non-negative");
  const auto schedule = lacunary_indices(alpha_sum(spec.alphas), flow, spec.j_lo, spec.j_hi);
  return parallel_map(
      schedule.entries.size(),
      [&](std::size_t i) {
        const auto& e = schedule.entries[i];
        const int J = refinement_stage(flow, e.j, spec.depth);
        return special_row(Probe(flow, f, J), Probe(flow, g, J), spec, e.j, e.n);
      },
      threads);
}

struct GridSearchResult {
  BigInt best_n;
  BigInt center_n;
  Rational best_upper;  // smallest max-deviation upper bound on the grid
  bool matches_center = false;
};

// Bounded search of n in [n0 - radius, n0 + radius] minimizing the certified
// max-deviation upper bound; ties prefer the n closest to n0, then the smaller.
inline GridSearchResult grid_search_n(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                      const SpecialLimitSpec& spec, int j, int radius, int threads = 1) {
  const auto schedule = lacunary_indices(alpha_sum(spec.alphas), flow, j, j);
  const BigInt n0 = schedule.entries.front().n;
  const int J = refinement_stage(flow, j, spec.depth);
  const Probe pf(flow, f, J), pg(flow, g, J);
  std::vector<BigInt> cands;
  for (int d = -radius; d <= radius; ++d)
    if (n0 + d >= 1) cands.push_back(n0 + d);
  const auto uppers = parallel_map(
      cands.size(), [&](std::size_t i) { return special_row(pf, pg, spec, j, cands[i]).max_deviation.hi; }, threads);
  GridSearchResult res;
  res.center_n = n0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const BigInt di = cands[i] > n0 ? BigInt(cands[i] - n0) : BigInt(n0 - cands[i]);
    const BigInt db = cands[best] > n0 ? BigInt(cands[best] - n0) : BigInt(n0 - cands[best]);
    if (uppers[i] < uppers[best] || (uppers[i] == uppers[best] && di < db)) best = i;
  }
  res.best_n = cands[best];
  res.best_upper = uppers[best];
  res.matches_center = res.best_n == n0;
  return res;
}

struct UConvergenceRow {
  int j = 0;
  int J = 0;
  BigInt n;
  CorrelationInterval deviation;  // |<T_{alpha n_j} f, g> - <T_{u_hat} f, g>|
};

inline std::vector<UConvergenceRow> u_convergence(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                                  const LacunarySchedule& schedule, const Rational& u_hat, int depth,
                                                  int threads = 1) {
  return parallel_map(
      schedule.entries.size(),
      [&](std::size_t i) {
        const auto& e = schedule.entries[i];
        const int J = refinement_stage(flow, e.j, depth);
        const Probe pf(flow, f, J), pg(flow, g, J);
        const auto d = abs_range(correlate(pf, pg, schedule.alpha * Rational(e.n)) - correlate(pf, pg, u_hat));
        return UConvergenceRow{e.j, J, e.n, d};
      },
      threads);
}

}  // namespace tsflow
