#pragma once

// Rank-one cutting-and-stacking flows.
//
// Stage j is a column of height h_j over a base of width w_j; the flow moves
// points upward at unit speed.  Stage j+1 cuts the column into r_j = 2^{n_j}-1
// equal subcolumns, puts s_j(i) units of spacer on top of subcolumn i, and
// stacks them left to right:
//
//   h_{j+1} = r_j h_j + sum_i s_j(i),   w_{j+1} = w_j / r_j.
//
// All geometry is exact.  Every height is a multiple of 1/D for a fixed
// lattice denominator D, so the hot paths work on 64-bit "ticks".

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tsflow/error.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

enum class MeasureMode { probability, sigma_finite };
enum class SpacerKind { constant, staircase, custom };

struct SpacerRule {
  SpacerKind kind = SpacerKind::constant;
  Rational value{0};                         // constant value / staircase step
  std::vector<std::vector<Rational>> table;  // custom: table[j-1] holds s_j(1..r_j)
  bool offset_h = false;                     // add h_j to every s_j(i)

  std::vector<Rational> spacers(int stage, int cuts, const Rational& height) const {
    std::vector<Rational> s(static_cast<std::size_t>(cuts));
    for (int i = 0; i < cuts; ++i) {
      switch (kind) {
        case SpacerKind::constant: s[i] = value; break;
        case SpacerKind::staircase: s[i] = value * i; break;
        case SpacerKind::custom: {
          if (stage < 1 || static_cast<std::size_t>(stage) > table.size())
            throw Error(ErrorCode::InvalidConfig,
                        "custom spacer table has no row for stage " + std::to_string(stage));
          const auto& row = table[stage - 1];
          if (row.size() != static_cast<std::size_t>(cuts))
            throw Error(ErrorCode::InvalidConfig, "custom spacer row " + std::to_string(stage) +
                                                      " needs " + std::to_string(cuts) + " entries");
          s[i] = row[i];
          break;
        }
      }
      if (s[i] < 0)
        throw Error(ErrorCode::NegativeSpacer, "s_" + std::to_string(stage) + "(" +
                                                   std::to_string(i + 1) + ") < 0");
      if (offset_h) s[i] += height;
    }
    return s;
  }
};

struct FlowParams {
  std::vector<int> n_schedule;  // r_j = 2^{n_j} - 1
  SpacerRule spacer;
  Rational h1{1};
  Rational w1{1};
  MeasureMode mode = MeasureMode::probability;
  int max_stage = 0;  // 0 means n_schedule.size() + 1
  int bit_budget = 62;
  bool require_growth = false;  // demand r_j > h_j^j at every cut

  int stage_count() const {
    return max_stage > 0 ? max_stage : static_cast<int>(n_schedule.size()) + 1;
  }
  int cuts(int j) const {
    if (j < 1 || static_cast<std::size_t>(j) > n_schedule.size())
      throw Error(ErrorCode::UnknownStage, "no cut configured at stage " + std::to_string(j));
    return (1 << n_schedule[j - 1]) - 1;
  }
};

struct TowerStage {
  int j = 1;
  Rational h;
  Rational w;
  Rational mu;           // total measure through stage j
  Rational spacer_mass;  // measure added as spacers when stage j was formed
};

inline void check_budget(const FlowParams& params, const TowerStage& s) {
  const auto budget = static_cast<std::size_t>(params.bit_budget);
  if (bit_length(s.h) > budget || bit_length(s.w) > budget || bit_length(s.mu) > budget)
    throw Error(ErrorCode::StageOverflow,
                "stage " + std::to_string(s.j) + " exceeds the " + std::to_string(params.bit_budget) +
                    "-bit budget");
}

inline TowerStage initial_stage(const FlowParams& params) {
  TowerStage s{1, params.h1, params.w1, params.h1 * params.w1, Rational(0)};
  check_budget(params, s);
  return s;
}

inline TowerStage advance_stage(const FlowParams& params, const TowerStage& stage) {
  if (stage.j >= params.stage_count())
    throw Error(ErrorCode::UnknownStage, "stage " + std::to_string(stage.j + 1) +
                                             " is beyond the configured maximum");
  const int r = params.cuts(stage.j);
  const auto s = params.spacer.spacers(stage.j, r, stage.h);
  Rational total(0);
  for (const auto& x : s) total += x;
  TowerStage next;
  next.j = stage.j + 1;
  next.h = stage.h * r + total;
  next.w = stage.w / r;
  next.spacer_mass = next.w * total;
  next.mu = stage.mu + next.spacer_mass;
  check_budget(params, next);
  return next;
}

struct AdmissibilityRow {
  int j = 0;
  int cuts = 0;
  Rational h;
  bool holds = false;  // r_j > h_j^j
};

// Growth condition r_j > h_j^j at every cut of the configured schedule.
inline std::vector<AdmissibilityRow> admissibility(const FlowParams& params) {
  std::vector<AdmissibilityRow> rows;
  TowerStage s = initial_stage(params);
  for (int j = 1; j < params.stage_count(); ++j) {
    const int r = params.cuts(j);
    rows.push_back({j, r, s.h, Rational(r) > pow(s.h, static_cast<unsigned>(j))});
    s = advance_stage(params, s);
  }
  return rows;
}

inline FlowParams build_params(FlowParams draft) {
  if (draft.n_schedule.empty()) throw Error(ErrorCode::InvalidConfig, "n_schedule is empty");
  for (int n : draft.n_schedule)
    if (n < 1 || n > 30) throw Error(ErrorCode::InvalidConfig, "n_j must lie in [1, 30]");
  if (draft.h1 <= 0 || draft.w1 <= 0) throw Error(ErrorCode::InvalidConfig, "h1 and w1 must be positive");
  if (draft.spacer.kind != SpacerKind::custom && draft.spacer.value < 0)
    throw Error(ErrorCode::NegativeSpacer, "spacer value is negative");
  if (draft.max_stage < 0 || draft.stage_count() > static_cast<int>(draft.n_schedule.size()) + 1)
    throw Error(ErrorCode::InvalidConfig, "max_stage needs n_j for every cut");
  if (draft.bit_budget < 8 || draft.bit_budget > 62)
    throw Error(ErrorCode::InvalidConfig, "bit_budget must lie in [8, 62]");
  for (const auto& row : admissibility(draft)) {
    if (draft.require_growth && !row.holds)
      throw Error(ErrorCode::NonAdmissibleSchedule,
                  "r_" + std::to_string(row.j) + " = " + std::to_string(row.cuts) + " <= h_" +
                      std::to_string(row.j) + "^" + std::to_string(row.j));
    if (draft.require_growth && row.cuts == 1)
      throw Error(ErrorCode::NonAdmissibleSchedule, "degenerate single-cut stage");
  }
  return draft;
}

// A height interval [lo, hi) of the stage-k column, across the full base.
struct LevelRef {
  int stage = 1;
  Rational lo;
  Rational hi;
};

struct LevelSet {
  int stage = 1;
  std::vector<std::pair<Rational, Rational>> intervals;  // sorted, disjoint, half-open
  Rational width;

  Rational length() const {
    Rational total(0);
    for (const auto& [a, b] : intervals) total += b - a;
    return total;
  }
  Rational measure() const { return width * length(); }
};

class Flow {
 public:
  explicit Flow(FlowParams params) : params_(build_params(std::move(params))) {
    stages_.push_back(initial_stage(params_));
    for (int j = 1; j < params_.stage_count(); ++j) {
      const auto& cur = stages_.back();
      spacers_.push_back(params_.spacer.spacers(j, params_.cuts(j), cur.h));
      stages_.push_back(advance_stage(params_, cur));
    }
    BigInt den = denominator(params_.h1);
    for (const auto& row : spacers_)
      for (const auto& s : row) den = boost::multiprecision::lcm(den, denominator(s));
    if (bit_length(den) > 40) throw Error(ErrorCode::StageOverflow, "height lattice denominator too large");
    tick_den_ = den.convert_to<std::int64_t>();
    for (const auto& st : stages_) {
      BigInt t = numerator(st.h * Rational(tick_den_));
      if (bit_length(t) > static_cast<std::size_t>(params_.bit_budget))
        throw Error(ErrorCode::StageOverflow, "tick height of stage " + std::to_string(st.j) +
                                                  " exceeds the bit budget");
      height_ticks_.push_back(t.convert_to<std::int64_t>());
    }
    periodic_ = true;
    for (int j = 1; j < stage_count(); ++j) {
      if (cuts(j) != 1) periodic_ = false;
      for (const auto& s : spacers_[j - 1])
        if (s != 0) periodic_ = false;
    }
  }

  const FlowParams& params() const { return params_; }
  int stage_count() const { return static_cast<int>(stages_.size()); }

  const TowerStage& stage(int j) const {
    check_stage(j);
    return stages_[j - 1];
  }
  const std::vector<TowerStage>& stages() const { return stages_; }

  // Number of subcolumns when stage j is cut to form stage j+1.
  int cuts(int j) const {
    check_cut(j);
    return params_.cuts(j);
  }
  const std::vector<Rational>& spacers(int j) const {
    check_cut(j);
    return spacers_[j - 1];
  }

  // Heights at which the copies of the stage-j column start inside stage j+1.
  std::vector<Rational> copy_offsets(int j) const {
    check_cut(j);
    std::vector<Rational> p;
    Rational pos(0);
    for (const auto& s : spacers_[j - 1]) {
      p.push_back(pos);
      pos += stage(j).h + s;
    }
    return p;
  }

  // Median of the copy-to-copy return times h_j + s_j(i).  Cut counts are odd,
  // so the median is one of the gaps.
  Rational return_time(int j) const {
    check_cut(j);
    std::vector<Rational> gaps;
    for (const auto& s : spacers_[j - 1]) gaps.push_back(stage(j).h + s);
    std::sort(gaps.begin(), gaps.end());
    return gaps[gaps.size() / 2];
  }

  // Every cut is a single copy with no spacer: the column closes into a circle
  // of length h1 and the flow is an exact rotation.
  bool periodic() const { return periodic_; }

  std::int64_t tick_denominator() const { return tick_den_; }
  std::int64_t height_ticks(int j) const {
    check_stage(j);
    return height_ticks_[j - 1];
  }

  // Start positions (in ticks) of all copies of the stage-k column inside stage J.
  std::vector<std::int64_t> offsets_ticks(int k, int J) const {
    check_stage(k);
    check_stage(J);
    if (J < k) throw Error(ErrorCode::UnrefinableStage, "cannot refine stage " + std::to_string(k) +
                                                            " to earlier stage " + std::to_string(J));
    std::vector<std::int64_t> cur{0};
    for (int m = k; m < J; ++m) {
      std::vector<std::int64_t> next;
      next.reserve(cur.size() * static_cast<std::size_t>(cuts(m)));
      std::int64_t pos = 0;
      for (const auto& s : spacers_[m - 1]) {
        for (auto o : cur) next.push_back(pos + o);
        pos += height_ticks_[m - 1] + to_ticks(s);
      }
      cur = std::move(next);
    }
    return cur;
  }

  std::int64_t to_ticks(const Rational& x) const {
    Rational t = x * Rational(tick_den_);
    if (!is_integer(t)) throw Error(ErrorCode::InvalidArgument, "value is off the height lattice");
    return to_int64(numerator(t));
  }

  // Heights of the stage-J column occupied by the stage-k level.
  LevelSet refine_level(const LevelRef& level, int J) const {
    if (level.stage < 1 || level.stage > stage_count() || J < 1 || J > stage_count())
      throw Error(ErrorCode::UnknownStage, "stage not constructed");
    if (J < level.stage) throw Error(ErrorCode::UnknownStage, "target stage precedes level stage");
    if (level.lo < 0 || level.hi > stage(level.stage).h || level.hi < level.lo)
      throw Error(ErrorCode::InvalidArgument, "level outside its column");
    LevelSet out;
    out.stage = J;
    out.width = stage(J).w;
    if (level.hi == level.lo) return out;
    for (auto o : offsets_ticks(level.stage, J)) {
      Rational base(o, tick_den_);
      out.intervals.emplace_back(base + level.lo, base + level.hi);
    }
    return out;
  }

 private:
  void check_stage(int j) const {
    if (j < 1 || j > stage_count())
      throw Error(ErrorCode::UnknownStage, "stage " + std::to_string(j) + " not constructed");
  }
  void check_cut(int j) const {
    if (j < 1 || j >= stage_count())
      throw Error(ErrorCode::UnknownStage, "stage " + std::to_string(j) + " has no cut");
  }

  FlowParams params_;
  std::vector<TowerStage> stages_;
  std::vector<std::vector<Rational>> spacers_;
  std::vector<std::int64_t> height_ticks_;
  std::int64_t tick_den_ = 1;
  bool periodic_ = false;
};

}  // namespace tsflow
