#include <gtest/gtest.h>

#include "tsflow/cyclic.hpp"

using namespace tsflow;

namespace {

Flow stair_flow() {
  FlowParams p;
  p.n_schedule = {2, 2, 2};
  p.spacer.kind = SpacerKind::staircase;
  p.spacer.value = 1;
  p.spacer.offset_h = true;
  p.h1 = 4;
  return Flow(p);
}

Flow rotation(long long period) {
  FlowParams p;
  p.n_schedule = {1, 1};
  p.h1 = period;
  return Flow(p);
}

const std::vector<Rational> kAlphas{Rational(1, 2), Rational(3, 4)};

StepFunction probe() { return StepFunction(1, {{{1, 0, 1}, 1}, {{1, 1, 3}, Rational(1, 2)}}); }

ElementaryTensor shifted(const StepFunction& f, std::vector<Rational> ts) {
  ElementaryTensor t;
  for (auto& s : ts) t.factors.push_back({f, s});
  return t;
}

}  // namespace

TEST(KrylovGram, ZeroOrderIsNormSquared) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  const auto g = krylov_gram(flow, kAlphas, F, 0, 3);
  ASSERT_EQ(g.dimension(), 1);
  const Rational n = norm_sq(flow, probe());
  EXPECT_EQ(g.entry(0, 0), CorrelationInterval(n * n));
  EXPECT_THROW(krylov_gram(flow, kAlphas, F, -1, 3), Error);
}

TEST(KrylovGram, ToeplitzByDifference) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  const int K = 4, J = 3;
  const auto g = krylov_gram(flow, kAlphas, F, K, J, 4);
  for (int k = -K; k <= K; ++k)
    for (int l = -K; l <= K; ++l) {
      // <U^k F, U^l F> computed directly with both factors shifted
      const auto direct = tensor_correlate(flow, {Rational(0), Rational(0)},
                                           shifted(probe(), scaled(kAlphas, Rational(k))),
                                           shifted(probe(), scaled(kAlphas, Rational(l))), J);
      EXPECT_EQ(g.entry(k, l), direct) << k << "," << l;
      EXPECT_EQ(g.entry(k, l), g.entry(k - l, 0));
    }
  const auto A = g.midpoint();
  EXPECT_EQ(A, A.transpose());
}

TEST(KrylovGram, PositiveSemidefinite) {
  const Flow flow = stair_flow();
  const auto g = krylov_gram(flow, kAlphas, ElementaryTensor::power(probe(), 2), 10, 3);
  const auto psd = check_psd(g, 1e-9);
  EXPECT_TRUE(psd.passes) << psd.min_eigenvalue << " vs " << psd.floor;
}

TEST(CyclicDimension, PeriodicShiftGivesRankOne) {
  const Flow flow = rotation(2);
  const auto F = ElementaryTensor::power(StepFunction::indicator({1, 0, 1}), 1);
  const auto g = krylov_gram(flow, {Rational(2)}, F, 5, 2);
  EXPECT_EQ(cyclic_dimension_estimate(g, 1e-8), 1);
}

TEST(CyclicDimension, OrthogonalFamilyIsFullRank) {
  const Flow flow = rotation(10);
  const auto F = ElementaryTensor::power(StepFunction::indicator({1, 0, 1}), 1);
  const auto g = krylov_gram(flow, {Rational(1)}, F, 2, 2);
  for (int k = -2; k <= 2; ++k)
    for (int l = -2; l <= 2; ++l) EXPECT_EQ(g.entry(k, l), CorrelationInterval(Rational(k == l ? 1 : 0)));
  EXPECT_EQ(cyclic_dimension_estimate(g, 1e-8), 5);
}

TEST(CyclicResidual, InSpanTargets) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  for (int m : {0, 1, -3, 6}) {
    const auto target = shifted(probe(), scaled(kAlphas, Rational(m)));
    const auto r = cyclic_residual(flow, kAlphas, F, target, 6, 3, 1e-12, 2);
    EXPECT_LE(r.residual_sq, 1e-10 * r.target_norm_sq) << "m = " << m;
  }
}

TEST(CyclicResidual, NonIncreasingInK) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  const auto target = shifted(probe(), {Rational(1, 3), Rational(1, 5)});
  double prev = 0;
  for (int K : {0, 2, 5, 10}) {
    const auto r = cyclic_residual(flow, kAlphas, F, target, K, 3, 1e-10, 3);
    EXPECT_GE(r.residual_sq, 0);
    EXPECT_LE(r.residual_sq, r.target_norm_sq * (1 + 1e-12));
    EXPECT_GE(r.slack, 0);
    if (K > 0) {
      EXPECT_LE(r.residual_sq, prev + 1e-10 * r.target_norm_sq) << "K = " << K;
    }
    prev = r.residual_sq;
  }
}

TEST(CyclicResidual, ThreadCountDoesNotMatter) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  const auto target = shifted(probe(), {Rational(1, 3), Rational(1, 5)});
  const auto a = cyclic_residual(flow, kAlphas, F, target, 5, 3, 1e-10, 1);
  const auto b = cyclic_residual(flow, kAlphas, F, target, 5, 3, 1e-10, 8);
  EXPECT_EQ(a.residual_sq, b.residual_sq);
  EXPECT_EQ(a.slack, b.slack);
  EXPECT_EQ(a.rank, b.rank);
}

TEST(CyclicResidual, ArityMismatch) {
  const Flow flow = stair_flow();
  const auto F = ElementaryTensor::power(probe(), 2);
  EXPECT_THROW(cyclic_residual(flow, kAlphas, F, ElementaryTensor::power(probe(), 3), 2, 3, 1e-10), Error);
}
