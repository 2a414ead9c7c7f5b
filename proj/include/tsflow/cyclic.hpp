#pragma once

// Krylov-Gram probes of the cyclic span of U = T_{alpha_1} (x) ... (x) T_{alpha_n}.
//
// G_{kl} = <U^k F, U^l F> = <U^{k-l} F, F> depends only on k - l, so the Gram
// matrix is assembled from 4K + 1 certified entries.  Linear algebra runs on
// the midpoints in double precision; interval radii are carried as additive
// slack on the residual.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tsflow/error.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/parallel.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

struct GramMatrix {
  int K = 0;
  std::vector<CorrelationInterval> by_difference;  // index d + 2K for d = k - l in [-2K, 2K]

  int dimension() const { return 2 * K + 1; }
  const CorrelationInterval& entry(int k, int l) const { return by_difference[static_cast<std::size_t>(k - l + 2 * K)]; }

  Eigen::MatrixXd midpoint() const {
    const int m = dimension();
    Eigen::MatrixXd A(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) A(a, b) = to_double(entry(a - K, b - K).mid());
    return A;
  }
  Rational max_radius() const {
    Rational r(0);
    for (const auto& e : by_difference) r = std::max(r, e.radius());
    return r;
  }
};

inline std::vector<Rational> scaled(const std::vector<Rational>& alphas, const Rational& s) {
  std::vector<Rational> out;
  for (const auto& a : alphas) out.push_back(a * s);
  return out;
}

inline GramMatrix krylov_gram(const Flow& flow, const std::vector<Rational>& alphas, const ElementaryTensor& F, int K,
                              int J, int threads = 1) {
  if (K < 0) throw Error(ErrorCode::InvalidArgument, "K must be non-negative");
  check_strictly_increasing(alphas);
  GramMatrix g;
  g.K = K;
  g.by_difference = parallel_map(
      static_cast<std::size_t>(4 * K + 1),
      [&](std::size_t i) {
        const int d = static_cast<int>(i) - 2 * K;
        return tensor_correlate(flow, scaled(alphas, Rational(d)), F, F, J);
      },
      threads);
  return g;
}

struct Spectrum {
  Eigen::VectorXd values;  // ascending
  Eigen::MatrixXd vectors;
};

inline Spectrum gram_spectrum(const GramMatrix& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.midpoint());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::IllConditioned, "eigen decomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

struct PsdCheck {
  double min_eigenvalue = 0;
  double floor = 0;  // -(tol_psd + dimension * max radius)
  bool passes = false;
};

// A symmetric perturbation with entries bounded by r has spectral norm <= m r.
inline PsdCheck check_psd(const GramMatrix& g, double tol_psd) {
  const auto sp = gram_spectrum(g);
  PsdCheck c;
  c.min_eigenvalue = sp.values(0);
  c.floor = -(tol_psd + g.dimension() * to_double(g.max_radius()));
  c.passes = c.min_eigenvalue >= c.floor;
  return c;
}

inline int cyclic_dimension_estimate(const GramMatrix& g, double tol_rank) {
  const auto sp = gram_spectrum(g);
  const double top = sp.values(sp.values.size() - 1);
  if (top <= 0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sp.values.size(); ++i)
    if (sp.values(i) > tol_rank * top) ++rank;
  return rank;
}

struct CyclicResidual {
  int K = 0;
  int rank = 0;
  double target_norm_sq = 0;
  double residual_sq = 0;  // |target|^2 - b^T G^+ b on midpoints, floored at 0
  double slack = 0;        // first-order effect of the interval radii of b and G
  double relative() const { return target_norm_sq > 0 ? residual_sq / target_norm_sq : 0.0; }
};

// Least-squares distance from target to span{U^k F : |k| <= K}.
inline CyclicResidual cyclic_residual(const Flow& flow, const std::vector<Rational>& alphas, const ElementaryTensor& F,
                                      const ElementaryTensor& target, int K, int J, double tol_rank, int threads = 1) {
  check_arity(F, target, alphas.size());
  const auto g = krylov_gram(flow, alphas, F, K, J, threads);
  const int m = g.dimension();
  // b_k = <target, U^k F>
  const auto b = parallel_map(
      static_cast<std::size_t>(m),
      [&](std::size_t i) {
        const int k = static_cast<int>(i) - K;
        return tensor_correlate(flow, scaled(alphas, Rational(-k)), target, F, J);
      },
      threads);
  Rational tn(1);
  for (const auto& fac : target.factors) tn *= norm_sq(flow, fac.f);

  const auto sp = gram_spectrum(g);
  const double top = sp.values(m - 1);
  if (!(top > 0)) throw Error(ErrorCode::IllConditioned, "Gram matrix has no positive eigenvalue");
  Eigen::VectorXd bv(m), brad(m);
  for (int i = 0; i < m; ++i) {
    bv(i) = to_double(b[i].mid());
    brad(i) = to_double(b[i].radius());
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  int rank = 0;
  const Eigen::VectorXd proj = sp.vectors.transpose() * bv;
  for (int i = 0; i < m; ++i) {
    if (sp.values(i) > tol_rank * top) {
      c += sp.vectors.col(i) * (proj(i) / sp.values(i));
      ++rank;
    }
  }
  CyclicResidual res;
  res.K = K;
  res.rank = rank;
  res.target_norm_sq = to_double(tn);
  res.residual_sq = std::max(0.0, res.target_norm_sq - bv.dot(c));
  Eigen::VectorXd ca = c.cwiseAbs();
  double gslack = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) gslack += ca(i) * ca(j) * to_double(g.entry(i - K, j - K).radius());
  res.slack = 2 * ca.dot(brad) + gslack;
  return res;
}

}  // namespace tsflow
