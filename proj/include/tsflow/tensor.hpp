#pragma once

// Tensor-product matrix elements, the Q_j operators and their predicted weak
// limits, sign relations among shift ratios, and symmetric-power / Fock
// exponential correlations.
//
// For 0 < alpha_1 < ... < alpha_n and a lacunary sequence n_j of sum(alpha),
//
//   Q_j = (x)_k  T_{alpha_k n_j} prod_{m<n} P(T_{alpha_m n_j}),
//   P(T_b) = (T_b + 2I + T_{-b}) / 4.
//
// Factor k expands into shifts beta * n_j with beta = alpha_k + sum_m delta_m alpha_m,
// delta in {-1, 0, 1}^{n-1}.  Along the sequence T_{beta n_j} tends to I when
// beta = 0, to T_{+-u} when beta = +-sum(alpha), and weakly to 0 otherwise.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsflow/correlator.hpp"
#include "tsflow/error.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/permanent.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

struct TensorFactor {
  StepFunction f;
  Rational shift{0};  // the factor is T_shift f
};

struct ElementaryTensor {
  std::vector<TensorFactor> factors;
  std::size_t arity() const { return factors.size(); }

  static ElementaryTensor power(const StepFunction& f, std::size_t n) {
    return ElementaryTensor{std::vector<TensorFactor>(n, TensorFactor{f, Rational(0)})};
  }
};

inline void check_arity(const ElementaryTensor& F, const ElementaryTensor& G, std::size_t n) {
  if (F.arity() == 0 || F.arity() != G.arity() || F.arity() != n)
    throw Error(ErrorCode::ArityMismatch, "tensor arities differ");
}

// <(x)_k T_{t_k} F, G> = prod_k <T_{t_k + s_k - s'_k} f_k, g_k>.
inline CorrelationInterval tensor_correlate(const Flow& flow, const std::vector<Rational>& shifts,
                                            const ElementaryTensor& F, const ElementaryTensor& G, int J) {
  check_arity(F, G, shifts.size());
  CorrelationInterval prod(Rational(1));
  for (std::size_t k = 0; k < shifts.size(); ++k) {
    const auto& a = F.factors[k];
    const auto& b = G.factors[k];
    prod = prod * correlate(flow, a.f, b.f, shifts[k] + a.shift - b.shift, J);
  }
  return prod;
}

struct ShiftTerm {
  std::vector<int> delta;  // entries in {-1, 0, 1}
  Rational beta;           // total shift is beta * n_j
  Rational coeff;
};

inline void check_strictly_increasing(const std::vector<Rational>& alphas) {
  if (alphas.empty()) throw Error(ErrorCode::InvalidArgument, "no alphas");
  if (alphas.front() <= 0) throw Error(ErrorCode::InvalidArgument, "alphas must be positive");
  for (std::size_t i = 1; i < alphas.size(); ++i)
    if (!(alphas[i - 1] < alphas[i])) throw Error(ErrorCode::InvalidArgument, "alphas must be strictly increasing");
}

// Calls fn(delta) for every delta in {-1, 0, 1}^len, last entry varying fastest.
template <typename Fn>
void for_each_sign_vector(std::size_t len, Fn&& fn) {
  std::vector<int> d(len, -1);
  while (true) {
    fn(d);
    std::size_t i = len;
    while (i > 0 && d[i - 1] == 1) d[--i] = -1;
    if (i == 0) return;
    ++d[i - 1];
  }
}

// expansion[k] lists the 3^{n-1} terms of factor k.
inline std::vector<std::vector<ShiftTerm>> expand_qj(const std::vector<Rational>& alphas) {
  check_strictly_increasing(alphas);
  const std::size_t n = alphas.size();
  std::vector<std::vector<ShiftTerm>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for_each_sign_vector(n - 1, [&](const std::vector<int>& d) {
      Rational beta = alphas[k], coeff(1);
      for (std::size_t m = 0; m + 1 < n; ++m) {
        beta += d[m] * alphas[m];
        coeff *= d[m] == 0 ? Rational(1, 2) : Rational(1, 4);
      }
      out[k].push_back({d, beta, coeff});
    });
  }
  return out;
}

enum class LimitSymbol { I, Tu, Tminus_u };

inline std::string to_string(LimitSymbol s) {
  switch (s) {
    case LimitSymbol::I: return "I";
    case LimitSymbol::Tu: return "T_u";
    case LimitSymbol::Tminus_u: return "T_-u";
  }
  return "?";
}

struct LimitTerm {
  Rational coeff;
  std::vector<LimitSymbol> pattern;
};

struct LimitPrediction {
  std::vector<LimitTerm> terms;  // lexicographic in pattern
  Rational b_n{0};               // all-I coefficient
  Rational c_n{0};               // I (x) ... (x) I (x) T_u coefficient
  bool exclusions_hold = true;   // no factor k < n carries beta = +-sum(alpha)
};

inline LimitPrediction predict_limit(const std::vector<Rational>& alphas) {
  const auto exp = expand_qj(alphas);
  const std::size_t n = alphas.size();
  Rational total(0);
  for (const auto& a : alphas) total += a;

  LimitPrediction pred;
  // surviving mass per factor and symbol
  std::vector<std::map<LimitSymbol, Rational>> surv(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& t : exp[k]) {
      if (t.beta == 0)
        surv[k][LimitSymbol::I] += t.coeff;
      else if (t.beta == total)
        surv[k][LimitSymbol::Tu] += t.coeff;
      else if (t.beta == -total)
        surv[k][LimitSymbol::Tminus_u] += t.coeff;
      else
        continue;
      if (k + 1 < n && t.beta != 0) pred.exclusions_hold = false;
    }
  }
  std::vector<LimitTerm> acc{{Rational(1), {}}};
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<LimitTerm> next;
    for (const auto& partial : acc)
      for (const auto& [sym, c] : surv[k]) {
        auto p = partial.pattern;
        p.push_back(sym);
        next.push_back({partial.coeff * c, std::move(p)});
      }
    acc = std::move(next);
  }
  pred.terms = std::move(acc);
  for (const auto& t : pred.terms) {
    bool all_i = true, last_u = true;
    for (std::size_t k = 0; k < n; ++k) {
      const auto want = k + 1 == n ? LimitSymbol::Tu : LimitSymbol::I;
      if (t.pattern[k] != LimitSymbol::I) all_i = false;
      if (t.pattern[k] != want) last_u = false;
    }
    if (all_i) pred.b_n = t.coeff;
    if (last_u) pred.c_n = t.coeff;
  }
  return pred;
}

// Factor-wise sums of correlations; shifts beta * n_j with equal beta are merged.
inline CorrelationInterval evaluate_qj(const Flow& flow, const std::vector<Rational>& alphas, const BigInt& nj,
                                       const ElementaryTensor& F, const ElementaryTensor& G, int J) {
  const auto exp = expand_qj(alphas);
  check_arity(F, G, alphas.size());
  CorrelationInterval prod(Rational(1));
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    std::map<Rational, Rational> merged;
    for (const auto& t : exp[k]) merged[t.beta] += t.coeff;
    const auto& a = F.factors[k];
    const auto& b = G.factors[k];
    const Probe pf(flow, a.f, J), pg(flow, b.f, J);
    CorrelationInterval sum(Rational(0));
    for (const auto& [beta, c] : merged) sum += c * correlate(pf, pg, beta * Rational(nj) + a.shift - b.shift);
    prod = prod * sum;
  }
  return prod;
}

// <L F, G> for the predicted limit L with T_u replaced by T_{u_hat}.
inline CorrelationInterval evaluate_prediction(const Flow& flow, const LimitPrediction& pred, const Rational& u_hat,
                                               const ElementaryTensor& F, const ElementaryTensor& G, int J) {
  CorrelationInterval total(Rational(0));
  for (const auto& term : pred.terms) {
    std::vector<Rational> shifts;
    for (auto s : term.pattern)
      shifts.push_back(s == LimitSymbol::I ? Rational(0) : s == LimitSymbol::Tu ? u_hat : Rational(-u_hat));
    total += term.coeff * tensor_correlate(flow, shifts, F, G, J);
  }
  return total;
}

// All d in {-1, 0, 1}^{n-1} with sum d_i alpha_i = alpha_n, in enumeration order.
inline std::vector<std::vector<int>> detect_relations(const std::vector<Rational>& alphas) {
  check_strictly_increasing(alphas);
  std::vector<std::vector<int>> out;
  const std::size_t n = alphas.size();
  if (n < 2) return out;
  for_each_sign_vector(n - 1, [&](const std::vector<int>& d) {
    Rational s(0);
    for (std::size_t i = 0; i + 1 < n; ++i) s += d[i] * alphas[i];
    if (s == alphas.back()) out.push_back(d);
  });
  return out;
}

struct IndependenceResult {
  int bound = 0;
  std::optional<std::vector<BigInt>> counterexample;  // z != 0 with sum z_i alpha_i = 0
  bool independent_within_bound() const { return !counterexample; }
};

// Searches max-norm shells 1..bound; within a shell vectors are visited in
// lexicographic order with the first nonzero entry positive.
inline IndependenceResult rational_independence(const std::vector<Rational>& alphas, int bound) {
  if (bound < 1) throw Error(ErrorCode::InvalidArgument, "coefficient bound must be at least 1");
  const std::size_t m = alphas.size();
  IndependenceResult res;
  res.bound = bound;
  for (int shell = 1; shell <= bound; ++shell) {
    std::vector<int> z(m, -shell);
    while (true) {
      int maxabs = 0;
      std::size_t first = m;
      for (std::size_t i = 0; i < m; ++i) {
        maxabs = std::max(maxabs, std::abs(z[i]));
        if (first == m && z[i] != 0) first = i;
      }
      if (maxabs == shell && first < m && z[first] > 0) {
        Rational s(0);
        for (std::size_t i = 0; i < m; ++i) s += z[i] * alphas[i];
        if (s == 0) {
          res.counterexample = std::vector<BigInt>(z.begin(), z.end());
          return res;
        }
      }
      std::size_t i = m;
      while (i > 0 && z[i - 1] == shell) z[--i] = -shell;
      if (i == 0) break;
      ++z[i - 1];
    }
  }
  return res;
}

// <T^{(.)n}(f_1 . ... . f_n), g_1 . ... . g_n> = perm(cross_gram) / n!.
inline CorrelationInterval sym_power_correlate(const Matrix<CorrelationInterval>& cross_gram) {
  const std::size_t n = cross_gram.size();
  for (const auto& row : cross_gram)
    if (row.size() != n) throw Error(ErrorCode::ArityMismatch, "cross Gram must be square");
  return permanent(cross_gram) / factorial(static_cast<unsigned>(n));
}

struct ExpCorrelation {
  CorrelationInterval enclosure;
  Rational partial_lo, partial_hi;  // sum through N without the tail
  Rational tail;
  Rational norm_product_upper;  // upper bound on |f| |g|
};

// sum_{n <= N} <T^{(.)n} f^{(.)n}, g^{(.)n}> / n! plus the tail bound
// x^{N+1} / (N+1)! / (1 - x / (N+2)) with x >= |f| |g|.
inline ExpCorrelation exp_correlate_from(const CorrelationInterval& c, const Rational& nf_sq, const Rational& ng_sq,
                                         unsigned N) {
  const Rational x = sqrt_upper(nf_sq * ng_sq);
  if (x >= Rational(N + 2)) throw Error(ErrorCode::DivergentTail, "|f||g| too large for truncation N");
  const auto clipped = intersect(c, CorrelationInterval(-x, x));
  CorrelationInterval sum(Rational(1));
  for (unsigned n = 1; n <= N; ++n) {
    Matrix<CorrelationInterval> gram(n, std::vector<CorrelationInterval>(n, clipped));
    sum += sym_power_correlate(gram) / factorial(n);
  }
  const Rational tail = pow(x, N + 1) / factorial(N + 1) / (1 - x / Rational(N + 2));
  return {sum + CorrelationInterval(-tail, tail), sum.lo, sum.hi, tail, x};
}

inline ExpCorrelation exp_correlate(const Flow& flow, const StepFunction& f, const StepFunction& g,
                                    const Rational& t, int J, unsigned N) {
  return exp_correlate_from(correlate(flow, f, g, t, J), norm_sq(flow, f), norm_sq(flow, g), N);
}

// Cross-correlation of the component T^{(.)m_1} (x) ... (x) T^{(.)m_k} on the
// vectors (x)_i f^{(.)m_i}, (x)_i g^{(.)m_i}.
inline CorrelationInterval product_power_correlate(const CorrelationInterval& c, const std::vector<unsigned>& multi_index) {
  CorrelationInterval prod(Rational(1));
  for (unsigned m : multi_index) {
    Matrix<CorrelationInterval> gram(m, std::vector<CorrelationInterval>(m, c));
    prod = prod * sym_power_correlate(gram);
  }
  return prod;
}

}  // namespace tsflow
