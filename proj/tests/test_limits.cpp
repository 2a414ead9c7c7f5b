#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tsflow/limits.hpp"

using namespace tsflow;

namespace {

std::vector<std::pair<int, Rational>> times(std::vector<long long> rs) {
  std::vector<std::pair<int, Rational>> out;
  for (std::size_t i = 0; i < rs.size(); ++i) out.emplace_back(static_cast<int>(i) + 1, Rational(rs[i]));
  return out;
}

LacunarySchedule schedule_with_defects(std::vector<Rational> defects) {
  LacunarySchedule s{Rational(1), {}};
  for (std::size_t i = 0; i < defects.size(); ++i)
    s.entries.push_back({static_cast<int>(i) + 1, Rational(10), BigInt(10), defects[i]});
  return s;
}

Flow test_flow() {
  FlowParams p;
  p.n_schedule = {2, 2, 2, 2};
  p.spacer.kind = SpacerKind::staircase;
  p.spacer.value = 1;
  p.spacer.offset_h = true;
  p.h1 = 4;
  return Flow(p);
}

StepFunction mean_zero_f() { return StepFunction(1, {{{1, 0, 1}, 1}, {{1, 1, 2}, -1}}); }
StepFunction mean_zero_g() { return StepFunction(1, {{{1, 2, 3}, 1}, {{1, 3, 4}, -1}}); }

}  // namespace

TEST(Lacunary, IntegerAlphaHasZeroDefect) {
  const auto s = lacunary_indices(Rational(1), times({3, 7, 15, 31}));
  for (const auto& e : s.entries) {
    EXPECT_EQ(Rational(e.n), e.time);
    EXPECT_EQ(e.defect, 0);
  }
}

TEST(Lacunary, RoundingArithmetic) {
  const auto s = lacunary_indices(Rational(2), times({7}));
  // 7/2 rounds to the even neighbour 4
  EXPECT_EQ(s.entries[0].n, 4);
  EXPECT_EQ(s.entries[0].defect, 1);
  EXPECT_EQ(lacunary_indices(Rational(2), times({5})).entries[0].n, 2);
}

// Exhaustive minimization of |alpha n - r| over n in [1, 2 r / alpha].
TEST(Lacunary, ThreeHalvesAgainstExhaustiveSearch) {
  const Rational alpha(3, 2);
  const auto s = lacunary_indices(alpha, times({3, 7, 15, 31}));
  for (const auto& e : s.entries) {
    Rational best_err(-1);
    std::vector<long long> argmins;
    for (long long n = 1; Rational(n) * alpha <= 2 * e.time + alpha; ++n) {
      const Rational err = abs(alpha * n - e.time);
      if (best_err < 0 || err < best_err) {
        best_err = err;
        argmins = {n};
      } else if (err == best_err) {
        argmins.push_back(n);
      }
    }
    EXPECT_EQ(abs(e.defect), best_err);
    bool found = false;
    for (long long n : argmins) found = found || BigInt(n) == e.n;
    EXPECT_TRUE(found);
    if (argmins.size() == 2) {
      EXPECT_EQ(e.n % 2, 0);
    }
  }
  // 3 = 2 * 3/2, 7 ~ 5 * 3/2 - 1/2, 15 = 10 * 3/2, 31 ~ 21 * 3/2 - 1/2
  EXPECT_EQ(s.entries[0].defect, 0);
  EXPECT_EQ(s.entries[1].defect, Rational(1, 2));
  EXPECT_EQ(s.entries[2].defect, 0);
  EXPECT_EQ(s.entries[3].defect, Rational(1, 2));
}

TEST(Lacunary, DefectBoundedByHalfAlpha) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const Rational alpha = oracle::random_rational(rng, Rational(1, 16), Rational(40), 16);
    std::vector<std::pair<int, Rational>> ts;
    for (int j = 1; j <= 6; ++j) ts.emplace_back(j, alpha + oracle::random_rational(rng, Rational(0), Rational(5000), 8));
    for (const auto& e : lacunary_indices(alpha, ts).entries) EXPECT_LE(abs(e.defect), alpha / 2);
  }
}

TEST(Lacunary, RejectsBadInput) {
  EXPECT_THROW(lacunary_indices(Rational(0), times({3})), Error);
  EXPECT_THROW(lacunary_indices(Rational(1), {{2, Rational(3)}, {1, Rational(7)}}), Error);
}

TEST(EstimateU, ZeroDefectCluster) {
  const auto est = estimate_u(lacunary_indices(Rational(1), times({3, 7, 15, 31})), Rational(1, 100));
  EXPECT_EQ(est.u_hat, 0);
  EXPECT_EQ(est.members, (std::vector<int>{1, 2, 3, 4}));
}

TEST(EstimateU, AlternatingDefectsTieGoesToLatestStage) {
  const Rational h(1, 2);
  const auto even = estimate_u(schedule_with_defects({h, -h, h, -h}), Rational(1, 100));
  EXPECT_EQ(even.u_hat, -h);
  EXPECT_EQ(even.members, (std::vector<int>{2, 4}));
  const auto odd = estimate_u(schedule_with_defects({h, -h, h, -h, h}), Rational(1, 100));
  EXPECT_EQ(odd.u_hat, h);
  EXPECT_EQ(odd.members.size(), 3u);
}

TEST(EstimateU, NoStableCluster) {
  try {
    estimate_u(schedule_with_defects({Rational(0), Rational(1, 3), Rational(2, 3)}), Rational(1, 100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoStableCluster);
  }
}

TEST(EstimateU, MembersWithinTolerance) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Rational> d;
    for (int i = 0; i < 6; ++i) d.push_back(oracle::random_rational(rng, Rational(-1, 2), Rational(1, 2), 8));
    const Rational tol(1, 8);
    try {
      const auto est = estimate_u(schedule_with_defects(d), tol);
      ASSERT_GE(est.members.size(), 2u);
      for (int j : est.members) EXPECT_LE(abs(d[j - 1] - est.u_hat), tol);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::NoStableCluster);
    }
  }
}

TEST(CheckRigidity, PeriodicFlowIsExactlyRigid) {
  FlowParams p;
  p.n_schedule = {1, 1, 1, 1};
  p.h1 = 3;
  const Flow flow(p);
  const auto rows = check_rigidity(flow, StepFunction::indicator({1, 0, 1}), 1, 4, 2);
  for (const auto& r : rows) EXPECT_EQ(r.defect, CorrelationInterval(Rational(0)));
}

TEST(CheckRigidity, DeeperOracleAndRange) {
  const Flow flow = test_flow();
  const StepFunction f = mean_zero_f();
  const Rational nf = norm_sq(flow, f);
  const auto rows = check_rigidity(flow, f, 1, 3, 2, 3);
  for (const auto& r : rows) {
    EXPECT_EQ(r.J, r.j + 2);
    const Rational oracle_value = 2 * nf - 2 * oracle::deeper(flow, f, f, r.t, r.J);
    EXPECT_TRUE(r.defect.contains(oracle_value));
    EXPECT_GE(r.defect.lo, 0);
    EXPECT_LE(r.defect.hi, 4 * nf);
  }
}

TEST(MiddleDecay, SamplerEndpoints) {
  const Rational R(37);
  const auto s = middle_samples(R, Rational(1, 4), 9);
  ASSERT_EQ(s.size(), 9u);
  EXPECT_EQ(s[0], R / 4);
  EXPECT_EQ(s[1], 3 * R / 4);
  for (const auto& a : s) {
    EXPECT_GE(a, R / 4);
    EXPECT_LE(a, 3 * R / 4);
  }
  EXPECT_EQ(middle_samples(R, Rational(1, 4), 9), s);
  EXPECT_THROW(middle_samples(R, Rational(1, 2), 9), Error);
  EXPECT_EQ(van_der_corput(3), Rational(3, 4));
  EXPECT_EQ(van_der_corput(6), Rational(3, 8));
}

TEST(MiddleDecay, ProbabilityModeRequiresMeanZero) {
  FlowParams p;
  p.n_schedule = {2, 2, 2};
  p.spacer.value = 1;
  p.h1 = 4;
  p.mode = MeasureMode::probability;
  const Flow flow(p);
  MiddleDecaySpec spec;
  spec.j_lo = spec.j_hi = 1;
  try {
    check_middle_decay(flow, StepFunction::indicator({1, 0, 1}), mean_zero_g(), spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotMeanZero);
  }
  EXPECT_NO_THROW(check_middle_decay(flow, mean_zero_f(), mean_zero_g(), spec));
  p.mode = MeasureMode::sigma_finite;
  EXPECT_NO_THROW(check_middle_decay(Flow(p), StepFunction::indicator({1, 0, 1}), mean_zero_g(), spec));
}

TEST(MiddleDecay, MaxEnclosesEverySample) {
  const Flow flow = test_flow();
  MiddleDecaySpec spec;
  spec.j_lo = 1;
  spec.j_hi = 3;
  spec.samples = 9;
  const auto rows = check_middle_decay(flow, mean_zero_f(), mean_zero_g(), spec, 2);
  for (const auto& row : rows) {
    Rational true_max(0);
    for (const auto& a : middle_samples(row.R, spec.epsilon, spec.samples)) {
      const Rational v = abs(oracle::deeper(flow, mean_zero_f(), mean_zero_g(), a, row.J));
      true_max = std::max(true_max, v);
    }
    // the deeper value sits inside every row enclosure, so its max does too
    EXPECT_TRUE(row.max_abs.contains(true_max)) << "stage " << row.j;
  }
}

TEST(MiddleDecay, DisjointSupportsGiveZero) {
  FlowParams p;
  p.n_schedule = {1, 1, 1};
  p.h1 = 4;
  p.mode = MeasureMode::sigma_finite;
  const Flow flow(p);
  MiddleDecaySpec spec;
  spec.j_lo = 1;
  spec.j_hi = 2;
  spec.samples = 2;
  // period 4, samples at 1 and 3: f(y + a) lands on [3,4) or [1,2), g is on [2,3)
  const auto rows = check_middle_decay(flow, StepFunction::indicator({1, 0, 1}), StepFunction::indicator({1, 2, 3}), spec);
  for (const auto& row : rows) {
    EXPECT_TRUE(row.max_abs.contains(Rational(0)));
    EXPECT_EQ(row.max_abs.width(), 0);
  }
}

TEST(SpecialLimit, BetaZeroTargetIsInnerProduct) {
  const Flow flow = test_flow();
  const Probe pf(flow, mean_zero_f(), 3), pg(flow, StepFunction::indicator({1, 0, 3}), 3);
  EXPECT_EQ(p_target(pf, pg, Rational(0)), correlate(pf, pg, Rational(0)));
}

TEST(SpecialLimit, WeightsQuarterHalfQuarter) {
  FlowParams p;
  p.n_schedule = {1, 1};
  p.h1 = 8;
  const Flow flow(p);
  const StepFunction f = StepFunction::indicator({1, 0, 1});
  const StepFunction g = StepFunction::indicator({1, 1, 2});
  const Probe pf(flow, f, 1), pg(flow, g, 1);
  // on the rotation only <T_{-1} f, g> = 1 is nonzero among the three terms
  EXPECT_EQ(p_target(pf, pg, Rational(-1)), CorrelationInterval(Rational(1, 4)));
  EXPECT_EQ(p_target(pf, pg, Rational(1)), CorrelationInterval(Rational(1, 4)));
  EXPECT_EQ(p_target(pf, pf, Rational(1)), CorrelationInterval(Rational(1, 2)));
}

TEST(SpecialLimit, DeviationShrinksWithDepth) {
  const Flow flow = test_flow();
  SpecialLimitSpec spec;
  spec.alphas = {Rational(1, 2), Rational(3, 4)};
  spec.beta = Rational(1, 2);
  spec.j_lo = 1;
  spec.j_hi = 2;
  std::vector<std::vector<SpecialRow>> by_depth;
  for (int depth = 1; depth <= 3; ++depth) {
    spec.depth = depth;
    by_depth.push_back(check_special_limit(flow, mean_zero_f(), mean_zero_g(), spec));
  }
  for (std::size_t i = 0; i < by_depth[0].size(); ++i)
    for (std::size_t d = 1; d < by_depth.size(); ++d) {
      const auto& a = by_depth[d - 1][i];
      const auto& b = by_depth[d][i];
      EXPECT_EQ(a.n, b.n);
      EXPECT_GE(b.max_deviation.lo, 0);
      EXPECT_LE(b.max_deviation.width(), a.max_deviation.width());
      EXPECT_TRUE(a.max_deviation.contains(b.max_deviation));
    }
}

TEST(SpecialLimit, SharedScheduleAndGridSearch) {
  const Flow flow = test_flow();
  SpecialLimitSpec spec;
  spec.alphas = {Rational(1, 2), Rational(3, 4)};
  spec.j_lo = 1;
  spec.j_hi = 3;
  const auto rows = check_special_limit(flow, mean_zero_f(), mean_zero_g(), spec);
  const auto sched = lacunary_indices(Rational(5, 4), flow, 1, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].n, sched.entries[i].n);
    EXPECT_EQ(rows[i].deviation.size(), 2u);
  }
  const auto gs = grid_search_n(flow, mean_zero_f(), mean_zero_g(), spec, 2, 2);
  EXPECT_EQ(gs.center_n, sched.entries[1].n);
  // brute force over the same window
  const Probe pf(flow, mean_zero_f(), 4), pg(flow, mean_zero_g(), 4);
  Rational best(-1);
  for (int d = -2; d <= 2; ++d) {
    const Rational u = special_row(pf, pg, spec, 2, gs.center_n + d).max_deviation.hi;
    if (best < 0 || u < best) best = u;
  }
  EXPECT_EQ(gs.best_upper, best);
}

TEST(SpecialLimit, RejectsBadSpec) {
  const Flow flow = test_flow();
  SpecialLimitSpec spec;
  EXPECT_THROW(check_special_limit(flow, mean_zero_f(), mean_zero_g(), spec), Error);
  spec.alphas = {Rational(-1)};
  EXPECT_THROW(check_special_limit(flow, mean_zero_f(), mean_zero_g(), spec), Error);
}
