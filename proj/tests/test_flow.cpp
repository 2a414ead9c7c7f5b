#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tsflow/flow.hpp"

using namespace tsflow;

namespace {

FlowParams simple(std::vector<int> ns, Rational h1, SpacerRule rule) {
  FlowParams p;
  p.n_schedule = std::move(ns);
  p.h1 = h1;
  p.spacer = std::move(rule);
  return p;
}

SpacerRule constant(Rational v, bool offset = false) {
  SpacerRule r;
  r.kind = SpacerKind::constant;
  r.value = v;
  r.offset_h = offset;
  return r;
}

SpacerRule custom(std::vector<std::vector<Rational>> table) {
  SpacerRule r;
  r.kind = SpacerKind::custom;
  r.table = std::move(table);
  return r;
}

}  // namespace

TEST(BuildParams, CutCountFromExponent) {
  const auto p = build_params(simple({2}, 1, constant(0)));
  EXPECT_EQ(p.cuts(1), 3);
}

TEST(BuildParams, DegenerateSingleCutAcceptedOutsidePaperRegime) {
  Flow f(simple({1}, 1, constant(0)));
  EXPECT_EQ(f.cuts(1), 1);
  EXPECT_EQ(f.stage(2).h, 1);
}

TEST(BuildParams, DegenerateSingleCutRejectedInPaperRegime) {
  auto p = simple({1}, Rational(1, 2), constant(0));
  p.require_growth = true;
  try {
    build_params(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonAdmissibleSchedule);
  }
}

// Growth table for n = (2, 3, 4, 5), h1 = 1, unit spacers plus h_j, from an
// independent run of the recursion in plain integers.
TEST(BuildParams, AdmissibilityTableMatchesDryRun) {
  auto p = simple({2, 3, 4, 5}, 1, constant(1, true));
  std::vector<bool> expected;
  long double h = 1;
  for (int j = 1; j <= 4; ++j) {
    const long double r = (1 << (j + 1)) - 1;
    long double hj = 1;
    for (int k = 0; k < j; ++k) hj *= h;
    expected.push_back(r > hj);
    h = r * h + r * (1 + h);
  }
  const auto rows = admissibility(p);
  ASSERT_EQ(rows.size(), expected.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].holds, expected[i]) << "stage " << i + 1;
  // h = 1, 9, 133, 4005: only the first cut satisfies r > h^j
  EXPECT_TRUE(rows[0].holds);
  EXPECT_FALSE(rows[1].holds);
  p.require_growth = true;
  EXPECT_THROW(build_params(p), Error);
}

TEST(BuildParams, RejectsNegativeSpacer) {
  try {
    Flow f(simple({2}, 1, constant(-1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeSpacer);
  }
  try {
    Flow f(simple({2}, 1, custom({{Rational(0), Rational(-1, 2), Rational(0)}})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NegativeSpacer);
  }
}

TEST(BuildParams, RejectsEmptySchedule) { EXPECT_THROW(build_params(simple({}, 1, constant(0))), Error); }

TEST(AdvanceStage, UnitSpacers) {
  Flow f(simple({2}, 1, constant(1)));
  EXPECT_EQ(f.stage(2).h, 6);
  EXPECT_EQ(f.stage(2).w, Rational(1, 3));
}

TEST(AdvanceStage, ZeroSpacersConserveMeasure) {
  Flow f(simple({2}, 2, constant(0)));
  EXPECT_EQ(f.stage(2).h, 6);
  EXPECT_EQ(f.stage(2).mu, f.stage(1).mu);
}

// s = (0,0,0) + h_1 each; closed form spacer mass = r h_1 w_2.
TEST(AdvanceStage, OffsetModeAddsHeight) {
  Flow f(simple({2}, 1, constant(0, true)));
  EXPECT_EQ(f.spacers(1), (std::vector<Rational>{1, 1, 1}));
  EXPECT_EQ(f.stage(2).h, 6);
  EXPECT_EQ(f.stage(2).spacer_mass, 3 * 1 * f.stage(2).w);
}

TEST(AdvanceStage, BitBudgetOverflow) {
  auto p = simple({6, 6, 6, 6, 6, 6}, 1000, constant(1, true));
  p.bit_budget = 40;
  try {
    Flow f(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StageOverflow);
  }
}

TEST(AdvanceStage, BeyondMaximumIsUnknownStage) {
  auto p = simple({2}, 1, constant(0));
  const auto s2 = advance_stage(p, initial_stage(p));
  try {
    advance_stage(p, s2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownStage);
  }
}

// Cut counts are always 2^n - 1, so the two-copy picture is read off the
// first two copies of a three-copy stack.
TEST(RefineLevel, CopiesStackedFlush) {
  Flow g(simple({2}, 1, constant(0)));
  const auto ls = g.refine_level({1, 0, 1}, 2);
  ASSERT_EQ(ls.intervals.size(), 3u);
  EXPECT_EQ(ls.intervals[0], std::make_pair(Rational(0), Rational(1)));
  EXPECT_EQ(ls.intervals[1], std::make_pair(Rational(1), Rational(2)));
}

TEST(RefineLevel, SpacerShiftsNextCopy) {
  Flow g(simple({2}, 1, custom({{Rational(1), Rational(0), Rational(0)}})));
  const auto ls = g.refine_level({1, 0, 1}, 2);
  ASSERT_EQ(ls.intervals.size(), 3u);
  EXPECT_EQ(ls.intervals[0], std::make_pair(Rational(0), Rational(1)));
  EXPECT_EQ(ls.intervals[1], std::make_pair(Rational(2), Rational(3)));
  EXPECT_EQ(ls.intervals[2], std::make_pair(Rational(3), Rational(4)));
}

TEST(RefineLevel, UnknownStage) {
  Flow g(simple({2}, 1, constant(0)));
  EXPECT_THROW(g.refine_level({1, 0, 1}, 5), Error);
  EXPECT_THROW(g.refine_level({2, 0, 1}, 1), Error);
}

// Three-stage refinement of a half level with mixed spacers, every sampled
// point classified by descending through the stacking.
TEST(RefineLevel, PointMembershipOracle) {
  Flow g(simple({2, 2, 2}, 2,
                custom({{Rational(0), Rational(1, 2), Rational(1)},
                        {Rational(3, 2), Rational(0), Rational(1, 2)},
                        {Rational(1), Rational(1), Rational(0)}})));
  const LevelRef level{1, Rational(1, 2), Rational(3, 2)};
  const int J = 4;
  const auto ls = g.refine_level(level, J);
  std::mt19937_64 rng(11);
  const Rational H = g.stage(J).h;
  int inside = 0;
  for (int i = 0; i < 100000; ++i) {
    const Rational y = oracle::random_rational(rng, Rational(0), H, 256);
    bool in_set = false;
    for (const auto& [a, b] : ls.intervals) in_set = in_set || (a <= y && y < b);
    ASSERT_EQ(in_set, oracle::in_level(g, level, y, J)) << "y = " << y;
    inside += in_set;
  }
  EXPECT_GT(inside, 0);
}

TEST(FlowProperties, RandomizedInvariants) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = oracle::random_params(rng, 5);
    Flow f(p);
    for (int j = 1; j < f.stage_count(); ++j) {
      Rational s(0);
      for (const auto& x : f.spacers(j)) s += x;
      EXPECT_EQ(f.stage(j + 1).h - f.cuts(j) * f.stage(j).h, s);
    }
    for (int k = 1; k <= f.stage_count(); ++k)
      for (int J = k; J <= f.stage_count(); ++J) {
        const Rational h = f.stage(k).h;
        const Rational lo = oracle::random_rational(rng, Rational(0), h, 4);
        const LevelRef level{k, lo, std::min(h, lo + Rational(1, 2))};
        const auto ls = f.refine_level(level, J);
        EXPECT_EQ(ls.measure(), f.stage(k).w * (level.hi - level.lo));
        const auto full = f.refine_level({k, Rational(0), h}, J);
        std::size_t copies = 1;
        for (int m = k; m < J; ++m) copies *= static_cast<std::size_t>(f.cuts(m));
        ASSERT_EQ(full.intervals.size(), copies);
        for (std::size_t i = 1; i < full.intervals.size(); ++i)
          EXPECT_LE(full.intervals[i - 1].second, full.intervals[i].first);
        EXPECT_LE(full.intervals.back().second, f.stage(J).h);
      }
  }
}

TEST(FlowProperties, SigmaFiniteMeasureStrictlyIncreases) {
  auto p = simple({2, 3, 4}, 5, constant(0, true));
  p.mode = MeasureMode::sigma_finite;
  Flow f(p);
  for (int j = 1; j < f.stage_count(); ++j) EXPECT_LT(f.stage(j).mu, f.stage(j + 1).mu);
}

TEST(FlowProperties, ReturnTimeIsMedianGap) {
  SpacerRule r;
  r.kind = SpacerKind::staircase;
  r.value = 1;
  Flow f(simple({3}, 10, r));
  // gaps 10 + (0..6); median is 13
  EXPECT_EQ(f.return_time(1), 13);
}

TEST(FlowProperties, PeriodicDetection) {
  EXPECT_TRUE(Flow(simple({1, 1, 1}, 3, constant(0))).periodic());
  EXPECT_FALSE(Flow(simple({1, 2}, 3, constant(0))).periodic());
  EXPECT_FALSE(Flow(simple({1}, 3, constant(1))).periodic());
}
