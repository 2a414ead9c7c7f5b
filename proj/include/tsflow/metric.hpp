#pragma once

// The flow metric
//
//   rho(R_s, T_s) = sum_i [mu(R_s A_i ^ T_s A_i) + mu(R_{-s} A_i ^ T_{-s} A_i)] / 2^i,
//   d(R, T)       = max_{s in [0, 1]} rho(R_s, T_s),
//
// evaluated at a finite stage J.  Two flows with the same cut counts, h1 and
// w1 live on one address space: a point of the stage-J column is either on a
// stage-1 copy, addressed by its copy path (i_1, ..., i_{J-1}), or on the
// spacer laid atop subcolumn i when stage m + 1 was formed, addressed by
// (m, i, i_{m+1}, ..., i_{J-1}).  Both carry a local height coordinate.
// Spacers of different lengths share the common initial segment.

#include <algorithm>
#include <map>
#include <vector>

#include "tsflow/error.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/parallel.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

// First entry 0 marks a stage-1 copy, 1 marks spacer material.
using Address = std::vector<int>;

struct Atom {
  Rational start;  // column height
  Rational length;
  Address key;
};

// Column of stage J as consecutive atoms, bottom to top.
inline std::vector<Atom> column_layout(const Flow& flow, int J) {
  if (J < 1 || J > flow.stage_count()) throw Error(ErrorCode::UnknownStage, "stage not constructed");
  std::vector<Atom> cur{{Rational(0), flow.stage(1).h, Address{0}}};
  for (int m = 1; m < J; ++m) {
    std::vector<Atom> next;
    Rational pos(0);
    const auto& sp = flow.spacers(m);
    for (int i = 0; i < flow.cuts(m); ++i) {
      for (const auto& a : cur) {
        Address k = a.key;
        k.push_back(i);
        next.push_back({pos + a.start, a.length, std::move(k)});
      }
      pos += flow.stage(m).h;
      if (sp[i] > 0) next.push_back({pos, sp[i], Address{1, m, i}});
      pos += sp[i];
    }
    cur = std::move(next);
  }
  return cur;
}

// Level [lo, hi) of the stage-1 material lying on copies whose path starts
// with `prefix`.  An empty prefix selects every copy.
struct MaterialLevel {
  std::vector<int> prefix;
  Rational lo;
  Rational hi;
};

inline Rational material_measure(const Flow& flow, const MaterialLevel& a) {
  Rational w = flow.stage(1).w;
  for (std::size_t i = 0; i < a.prefix.size(); ++i) w /= flow.cuts(static_cast<int>(i) + 1);
  return w * (a.hi - a.lo);
}

struct MetricBasis {
  std::vector<MaterialLevel> sets;  // measure-decreasing
  Rational tail;                    // sum over dropped enumerated sets of 4 mu(A_i) / 2^i
  Rational lipschitz;               // sum_i 8 mu(A_i) / (length_i 2^i)
};

// Unit levels of the stage-1 material located at stages 1..max_stage, stably
// sorted by decreasing measure and truncated to `count`.
inline MetricBasis default_basis(const Flow& flow, int count, int max_stage = 3) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "basis count must be positive");
  const Rational h1 = flow.stage(1).h;
  const BigInt units = floor(h1);
  std::vector<std::vector<int>> prefixes{{}};
  std::vector<MaterialLevel> all;
  for (int k = 1; k <= std::min(max_stage, flow.stage_count()); ++k) {
    if (k > 1) {
      std::vector<std::vector<int>> next;
      for (const auto& p : prefixes)
        for (int i = 0; i < flow.cuts(k - 1); ++i) {
          auto q = p;
          q.push_back(i);
          next.push_back(std::move(q));
        }
      prefixes = std::move(next);
    }
    for (const auto& p : prefixes) {
      for (BigInt u = 0; u < units; ++u) all.push_back({p, Rational(u), Rational(u + 1)});
      if (Rational(units) < h1) all.push_back({p, Rational(units), h1});
    }
  }
  std::stable_sort(all.begin(), all.end(), [&](const MaterialLevel& a, const MaterialLevel& b) {
    return material_measure(flow, a) > material_measure(flow, b);
  });
  MetricBasis basis;
  Rational weight(1, 2);
  for (std::size_t i = 0; i < all.size(); ++i, weight /= 2) {
    const Rational mu = material_measure(flow, all[i]);
    if (static_cast<int>(i) < count) {
      basis.sets.push_back(all[i]);
      basis.lipschitz += 8 * mu / (all[i].hi - all[i].lo) * weight;
    } else {
      basis.tail += 4 * mu * weight;
    }
  }
  return basis;
}

struct FlowPair {
  const Flow* R;
  const Flow* T;
};

inline void check_compatible(const Flow& a, const Flow& b) {
  if (a.params().n_schedule != b.params().n_schedule || a.stage(1).h != b.stage(1).h ||
      a.stage(1).w != b.stage(1).w)
    throw Error(ErrorCode::InvalidArgument, "flows in a metric pair need equal n_schedule, h1 and w1");
}

namespace detail {

struct ShiftedImage {
  std::map<Address, std::vector<std::pair<Rational, Rational>>> pieces;  // local intervals by address
  Rational escaped;  // column length that left [0, h_J)
};

inline ShiftedImage shifted_image(const std::vector<Atom>& layout, const Rational& height,
                                  const MaterialLevel& a, const Rational& s) {
  ShiftedImage img;
  auto starts_cmp = [](const Atom& x, const Rational& y) { return x.start + x.length <= y; };
  for (const auto& atom : layout) {
    if (atom.key[0] != 0) continue;
    if (!std::equal(a.prefix.begin(), a.prefix.end(), atom.key.begin() + 1)) continue;
    Rational lo = atom.start + a.lo + s, hi = atom.start + a.hi + s;
    if (lo < 0) {
      img.escaped += std::min(hi, Rational(0)) - lo;
      lo = 0;
    }
    if (hi > height) {
      img.escaped += hi - std::max(lo, height);
      hi = height;
    }
    if (!(lo < hi)) continue;
    auto it = std::lower_bound(layout.begin(), layout.end(), lo, starts_cmp);
    for (; it != layout.end() && it->start < hi; ++it) {
      const Rational x = std::max(lo, it->start), y = std::min(hi, it->start + it->length);
      if (x < y) img.pieces[it->key].emplace_back(x - it->start, y - it->start);
    }
  }
  return img;
}

inline Rational overlap_length(const ShiftedImage& p, const ShiftedImage& q) {
  Rational total(0);
  for (const auto& [key, xs] : p.pieces) {
    auto it = q.pieces.find(key);
    if (it == q.pieces.end()) continue;
    for (const auto& [a, b] : xs)
      for (const auto& [c, d] : it->second) {
        const Rational lo = std::max(a, c), hi = std::min(b, d);
        if (lo < hi) total += hi - lo;
      }
  }
  return total;
}

}  // namespace detail

// mu(R_s A ^ T_s A) = 2 mu(A) - 2 mu(R_s A & T_s A); escaped mass may or may
// not meet, up to the smaller of the two escaped amounts.
inline CorrelationInterval symmetric_difference(const Flow& R, const std::vector<Atom>& lr, const Flow& T,
                                                const std::vector<Atom>& lt, int J, const MaterialLevel& a,
                                                const Rational& s) {
  const auto ir = detail::shifted_image(lr, R.stage(J).h, a, s);
  const auto it = detail::shifted_image(lt, T.stage(J).h, a, s);
  const Rational w = R.stage(J).w;
  const Rational known = detail::overlap_length(ir, it) * w;
  const Rational extra = std::min(ir.escaped, it.escaped) * w;
  const Rational mu = material_measure(R, a);
  return {2 * mu - 2 * (known + extra), 2 * mu - 2 * known};
}

struct MetricContext {
  const Flow* R;
  const Flow* T;
  int J;
  std::vector<Atom> layout_r;
  std::vector<Atom> layout_t;

  MetricContext(const Flow& r, const Flow& t, int stage) : R(&r), T(&t), J(stage) {
    check_compatible(r, t);
    layout_r = column_layout(r, J);
    layout_t = column_layout(t, J);
  }
};

inline CorrelationInterval rho(const MetricContext& ctx, const Rational& s, const MetricBasis& basis) {
  if (s < 0 || s > 1) throw Error(ErrorCode::InvalidArgument, "s must lie in [0, 1]");
  if (s == 0) return CorrelationInterval(Rational(0));
  CorrelationInterval total(Rational(0));
  Rational weight(1, 2);
  for (const auto& a : basis.sets) {
    const auto plus = symmetric_difference(*ctx.R, ctx.layout_r, *ctx.T, ctx.layout_t, ctx.J, a, s);
    const auto minus = symmetric_difference(*ctx.R, ctx.layout_r, *ctx.T, ctx.layout_t, ctx.J, a, -s);
    total += weight * (plus + minus);
    weight /= 2;
  }
  return {total.lo, total.hi + basis.tail};
}

inline CorrelationInterval rho(const Flow& R, const Flow& T, const Rational& s, const MetricBasis& basis, int J) {
  return rho(MetricContext(R, T, J), s, basis);
}

struct MetricEstimate {
  Rational lower;  // max over the grid of certified lower bounds of rho
  Rational upper;  // max of upper bounds plus lipschitz * step / 2
  Rational argmax;
  std::vector<std::pair<Rational, CorrelationInterval>> profile;
};

inline MetricEstimate metric_d(const Flow& R, const Flow& T, const Rational& grid_step, const MetricBasis& basis, int J,
                               int threads = 1) {
  if (grid_step <= 0 || grid_step > 1) throw Error(ErrorCode::InvalidArgument, "grid_step must lie in (0, 1]");
  const MetricContext ctx(R, T, J);
  std::vector<Rational> grid;
  for (Rational s(0); s < 1; s += grid_step) grid.push_back(s);
  grid.push_back(Rational(1));
  const auto vals = parallel_map(grid.size(), [&](std::size_t i) { return rho(ctx, grid[i], basis); }, threads);
  MetricEstimate est;
  Rational top(0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    est.profile.emplace_back(grid[i], vals[i]);
    if (vals[i].lo > est.lower) {
      est.lower = vals[i].lo;
      est.argmax = grid[i];
    }
    top = std::max(top, vals[i].hi);
  }
  // adjacent grid points are at most grid_step apart
  Rational gap(0);
  for (std::size_t i = 1; i < grid.size(); ++i) gap = std::max(gap, grid[i] - grid[i - 1]);
  est.upper = top + basis.lipschitz * gap / 2;
  return est;
}

}  // namespace tsflow
