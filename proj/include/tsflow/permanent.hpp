#pragma once

// Permanents of square matrices by Ryser's inclusion-exclusion formula
//
//   perm(A) = (-1)^n sum_{S subset [n]} (-1)^{|S|} prod_i sum_{j in S} a_ij,
//
// visited in Gray-code order so each step updates one column of the row sums.

#include <cstdint>
#include <vector>

#include "tsflow/error.hpp"
#include "tsflow/interval.hpp"
#include "tsflow/rational.hpp"

namespace tsflow {

template <typename T>
using Matrix = std::vector<std::vector<T>>;

template <typename T>
T permanent_ryser(const Matrix<T>& a) {
  const std::size_t n = a.size();
  for (const auto& row : a)
    if (row.size() != n) throw Error(ErrorCode::ArityMismatch, "permanent needs a square matrix");
  if (n == 0) return T(1);
  if (n > 24) throw Error(ErrorCode::InvalidArgument, "permanent size beyond enumeration budget");
  std::vector<T> rowsum(n, T(0));
  T total(0);
  std::uint64_t gray = 0;
  const std::uint64_t subsets = std::uint64_t{1} << n;
  for (std::uint64_t k = 1; k < subsets; ++k) {
    const std::uint64_t next = k ^ (k >> 1);
    const std::uint64_t flip = next ^ gray;
    std::size_t col = 0;
    while (!((flip >> col) & 1u)) ++col;
    const bool added = (next >> col) & 1u;
    for (std::size_t i = 0; i < n; ++i) rowsum[i] = added ? T(rowsum[i] + a[i][col]) : T(rowsum[i] - a[i][col]);
    gray = next;
    T prod(1);
    for (std::size_t i = 0; i < n; ++i) prod = prod * rowsum[i];
    const int size = __builtin_popcountll(next);
    if ((n - static_cast<std::size_t>(size)) % 2 == 0)
      total = total + prod;
    else
      total = total - prod;
  }
  return total;
}

// Enclosure of perm over an interval matrix.  With A = M + E, |E| <= R entrywise,
// |perm(M + E) - perm(M)| <= perm(|M| + R) - perm(|M|) because every term of the
// multilinear expansion is dominated entrywise.
inline CorrelationInterval permanent(const Matrix<CorrelationInterval>& a) {
  const std::size_t n = a.size();
  Matrix<Rational> mid(n), absmid(n), bound(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].size() != n) throw Error(ErrorCode::ArityMismatch, "permanent needs a square matrix");
    for (std::size_t j = 0; j < n; ++j) {
      mid[i].push_back(a[i][j].mid());
      absmid[i].push_back(abs(a[i][j].mid()));
      bound[i].push_back(abs(a[i][j].mid()) + a[i][j].radius());
    }
  }
  const Rational p = permanent_ryser(mid);
  const Rational r = permanent_ryser(bound) - permanent_ryser(absmid);
  return CorrelationInterval::around(p, r);
}

}  // namespace tsflow
