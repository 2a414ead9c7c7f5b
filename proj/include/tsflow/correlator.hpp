#pragma once

// Certified Koopman matrix elements <T_t f, g> for step functions on tower levels.
//
// Inside the stage-J column T_t is a vertical translation, so the in-column
// part of <T_t f, g> is an exact overlap integral.  Points that leave the
// column through the top (or bottom) may re-enter it at a later stage; their
// contribution is bounded by
//
//   min(|f|_inf * mass(|g| within |t| of the exit edge),
//       |g|_inf * mass(|f| within |t| of the entry edge))
//
// and the enclosure is [value - bound, value + bound].

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "tsflow/error.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

struct StepTerm {
  LevelRef level;
  Rational coeff;
};

// Piecewise constant value on [lo, hi) of the defining column.
struct Piece {
  Rational lo;
  Rational hi;
  Rational value;
};

class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(int stage, std::vector<StepTerm> terms) : stage_(stage), terms_(std::move(terms)) {
    for (const auto& t : terms_) {
      if (t.level.stage != stage_)
        throw Error(ErrorCode::InvalidArgument, "all terms of a step function share one stage");
      if (t.level.hi < t.level.lo || t.level.lo < 0)
        throw Error(ErrorCode::InvalidArgument, "malformed level interval");
    }
  }

  static StepFunction indicator(const LevelRef& level, Rational coeff = Rational(1)) {
    return StepFunction(level.stage, {{level, std::move(coeff)}});
  }

  int stage() const { return stage_; }
  const std::vector<StepTerm>& terms() const { return terms_; }

  // Canonical form: sorted, disjoint, nonzero pieces.
  std::vector<Piece> pieces() const {
    std::map<Rational, Rational> delta;
    for (const auto& t : terms_) {
      if (t.level.hi == t.level.lo || t.coeff == 0) continue;
      delta[t.level.lo] += t.coeff;
      delta[t.level.hi] -= t.coeff;
    }
    std::vector<Piece> out;
    Rational acc(0);
    for (auto it = delta.begin(); it != delta.end(); ++it) {
      acc += it->second;
      auto nx = std::next(it);
      if (nx == delta.end()) break;
      if (acc == 0) continue;
      if (!out.empty() && out.back().hi == it->first && out.back().value == acc)
        out.back().hi = nx->first;
      else
        out.push_back({it->first, nx->first, acc});
    }
    return out;
  }

  // Integral against the level measure vanishes (levels of one stage share a width).
  bool mean_zero() const {
    Rational s(0);
    for (const auto& t : terms_) s += t.coeff * (t.level.hi - t.level.lo);
    return s == 0;
  }

  Rational sup_norm() const {
    Rational m(0);
    for (const auto& p : pieces()) m = std::max(m, abs(p.value));
    return m;
  }

 private:
  int stage_ = 1;
  std::vector<StepTerm> terms_;
};

// Exact |f|^2 = sum value^2 * length * w_k.  Refinement preserves it.
inline Rational norm_sq(const Flow& flow, const StepFunction& f) {
  Rational s(0);
  for (const auto& p : f.pieces()) s += p.value * p.value * (p.hi - p.lo);
  return s * flow.stage(f.stage()).w;
}

inline Rational integral(const Flow& flow, const StepFunction& f) {
  Rational s(0);
  for (const auto& p : f.pieces()) s += p.value * (p.hi - p.lo);
  return s * flow.stage(f.stage()).w;
}

namespace detail {

inline __int128 mul_checked(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorCode::StageOverflow, "128-bit overflow");
  return r;
}
inline __int128 add_checked(__int128 a, __int128 b) {
  __int128 r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorCode::StageOverflow, "128-bit overflow");
  return r;
}
inline __int128 abs128(__int128 a) { return a < 0 ? -a : a; }

struct Segment {
  std::int64_t lo;
  std::int64_t hi;
  std::int64_t value;
};

}  // namespace detail

// A step function flattened onto the stage-J column.  Coordinates are integers
// in units of 1 / (D * scale) where D is the flow's tick denominator; values
// are integers in units of value_unit.
class Probe {
 public:
  Probe(const Flow& flow, const StepFunction& f, int J) : flow_(&flow), stage_(J) {
    if (J < f.stage()) throw Error(ErrorCode::UnrefinableStage, "probe stage precedes function stage");
    if (J > flow.stage_count()) throw Error(ErrorCode::UnrefinableStage, "stage not constructed");
    const auto pieces = f.pieces();
    const Rational col = flow.stage(f.stage()).h;
    const Rational D(flow.tick_denominator());
    BigInt scale = 1, vden = 1;
    for (const auto& p : pieces) {
      if (p.lo < 0 || p.hi > col) throw Error(ErrorCode::InvalidArgument, "level outside its column");
      scale = boost::multiprecision::lcm(scale, denominator(p.lo * D));
      scale = boost::multiprecision::lcm(scale, denominator(p.hi * D));
      vden = boost::multiprecision::lcm(vden, denominator(p.value));
    }
    if (bit_length(scale) > 40 || bit_length(vden) > 40)
      throw Error(ErrorCode::StageOverflow, "step function denominators too large");
    scale_ = scale.convert_to<std::int64_t>();
    value_unit_ = Rational(1, vden);
    length_ = to_int64(BigInt(flow.height_ticks(J)) * scale_);
    width_ = flow.stage(J).w;

    std::vector<detail::Segment> pattern;
    for (const auto& p : pieces) {
      auto lo = to_int64(numerator(p.lo * D * Rational(scale_)));
      auto hi = to_int64(numerator(p.hi * D * Rational(scale_)));
      auto v = to_int64(numerator(p.value * Rational(vden)));
      pattern.push_back({lo, hi, v});
      sup_ = std::max<std::int64_t>(sup_, v < 0 ? -v : v);
    }
    const auto offsets = flow.offsets_ticks(f.stage(), J);
    segs_.reserve(offsets.size() * pattern.size());
    for (auto o : offsets) {
      const auto base = o * scale_;
      for (const auto& s : pattern) segs_.push_back({base + s.lo, base + s.hi, s.value});
    }
  }

  const Flow& flow() const { return *flow_; }
  int stage() const { return stage_; }
  std::int64_t scale() const { return scale_; }
  std::int64_t length() const { return length_; }
  std::int64_t sup() const { return sup_; }
  const Rational& value_unit() const { return value_unit_; }
  const Rational& width() const { return width_; }
  const std::vector<detail::Segment>& segments() const { return segs_; }

 private:
  const Flow* flow_;
  int stage_;
  std::int64_t scale_ = 1;
  std::int64_t length_ = 0;
  std::int64_t sup_ = 0;
  Rational value_unit_{1};
  Rational width_;
  std::vector<detail::Segment> segs_;
};

namespace detail {

// sum over pairs of value_f * value_g * |([a - p, b - p) & [c, d))| with f
// coordinates multiplied by af and g coordinates by ag.
inline __int128 overlap_sum(const std::vector<Segment>& f, __int128 af, const std::vector<Segment>& g,
                            __int128 ag, __int128 p) {
  __int128 total = 0;
  std::size_t i = 0, k = 0;
  while (i < f.size() && k < g.size()) {
    const __int128 a = f[i].lo * af - p, b = f[i].hi * af - p;
    const __int128 c = g[k].lo * ag, d = g[k].hi * ag;
    const __int128 lo = std::max(a, c), hi = std::min(b, d);
    if (hi > lo) {
      const __int128 len = hi - lo;
      total = add_checked(total, mul_checked(mul_checked(len, f[i].value), g[k].value));
    }
    if (b <= d)
      ++i;
    else
      ++k;
  }
  return total;
}

// sum of |value| * length of the part of `segs` (scaled by a) inside [lo, hi).
inline __int128 abs_mass(const std::vector<Segment>& segs, __int128 a, __int128 lo, __int128 hi) {
  __int128 total = 0;
  for (const auto& s : segs) {
    const __int128 x = std::max<__int128>(s.lo * a, lo), y = std::min<__int128>(s.hi * a, hi);
    if (y > x) total = add_checked(total, mul_checked(y - x, s.value < 0 ? -s.value : s.value));
  }
  return total;
}

}  // namespace detail

struct CorrelationParts {
  Rational value;   // exact in-column part
  Rational escape;  // certified bound on the escaping part
  CorrelationInterval enclosure() const { return {value - escape, value + escape}; }
};

inline CorrelationParts correlate_parts(const Probe& f, const Probe& g, const Rational& t) {
  if (&f.flow() != &g.flow() || f.stage() != g.stage())
    throw Error(ErrorCode::InvalidArgument, "probes must share flow and stage");
  const Flow& flow = f.flow();
  const Rational D(flow.tick_denominator());
  BigInt L = boost::multiprecision::lcm(BigInt(f.scale()), BigInt(g.scale()));
  L = boost::multiprecision::lcm(L, denominator(t * D));
  if (bit_length(L) > 60) throw Error(ErrorCode::StageOverflow, "shift denominator too large");
  const __int128 Li = L.convert_to<std::int64_t>();
  const __int128 af = Li / f.scale(), ag = Li / g.scale();
  const __int128 p = to_int128(numerator(t * D * Rational(L)));
  const __int128 H = detail::mul_checked(f.length(), af);

  __int128 sum = 0, bound = 0;
  if (flow.periodic()) {
    __int128 pm = p % H;
    if (pm < 0) pm += H;
    sum = detail::add_checked(detail::overlap_sum(f.segments(), af, g.segments(), ag, pm),
                              detail::overlap_sum(f.segments(), af, g.segments(), ag, pm - H));
  } else {
    if (detail::abs128(p) >= H)
      throw Error(ErrorCode::ShiftTooLarge, "|t| >= h_" + std::to_string(f.stage()));
    sum = detail::overlap_sum(f.segments(), af, g.segments(), ag, p);
    if (p != 0) {
      const __int128 q = detail::abs128(p);
      // t > 0: g near the top meets f that re-entered near the bottom; t < 0 mirrored.
      const __int128 gmass = p > 0 ? detail::abs_mass(g.segments(), ag, H - q, H)
                                   : detail::abs_mass(g.segments(), ag, 0, q);
      const __int128 fmass = p > 0 ? detail::abs_mass(f.segments(), af, 0, q)
                                   : detail::abs_mass(f.segments(), af, H - q, H);
      bound = std::min(detail::mul_checked(gmass, f.sup()), detail::mul_checked(fmass, g.sup()));
    }
  }
  const Rational factor = f.value_unit() * g.value_unit() * f.width() / (D * Rational(L));
  return {from_int128(sum) * factor, from_int128(bound) * factor};
}

inline CorrelationInterval correlate(const Probe& f, const Probe& g, const Rational& t) {
  return correlate_parts(f, g, t).enclosure();
}

inline CorrelationInterval correlate(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                     const Rational& t, int J) {
  return correlate(Probe(flow, f, J), Probe(flow, g, J), t);
}

// Enclosure of |T_t f - f|^2 = 2|f|^2 - 2<T_t f, f>, clipped to [0, 4|f|^2].
inline CorrelationInterval rigidity_defect(const Probe& f, const Rational& t, const Rational& fnorm_sq) {
  const auto c = correlate(f, f, t);
  CorrelationInterval d(2 * fnorm_sq - 2 * c.hi, 2 * fnorm_sq - 2 * c.lo);
  return intersect(d, CorrelationInterval(Rational(0), 4 * fnorm_sq));
}

inline CorrelationInterval rigidity_defect(const Flow& flow, const StepFunction& f, const Rational& t, int J) {
  return rigidity_defect(Probe(flow, f, J), t, norm_sq(flow, f));
}

// Interval divided by the stage-J measure (probability-mode normalization).
inline CorrelationInterval normalized(const CorrelationInterval& c, const Flow& flow, int J) {
  return c / flow.stage(J).mu;
}

}  // namespace tsflow
