#pragma once

// Closed intervals [lo, hi] over an exact ordered field.

#include <algorithm>
#include <initializer_list>
#include <ostream>

#include "tsflow/rational.hpp"

namespace tsflow {

template <typename T>
struct Interval {
  T lo{};
  T hi{};

  Interval() = default;
  Interval(T point) : lo(point), hi(point) {}  // NOLINT: points promote implicitly
  Interval(T a, T b) : lo(std::move(a)), hi(std::move(b)) {
    if (hi < lo) throw Error(ErrorCode::InvalidArgument, "interval with lo > hi");
  }

  static Interval around(const T& mid, const T& radius) { return Interval(mid - radius, mid + radius); }

  T width() const { return hi - lo; }
  T mid() const { return (lo + hi) / 2; }
  T radius() const { return (hi - lo) / 2; }
  T mag() const { return std::max(tsflow_abs(lo), tsflow_abs(hi)); }
  // smallest |x| over the interval
  T mig() const {
    if (contains(T(0))) return T(0);
    return std::min(tsflow_abs(lo), tsflow_abs(hi));
  }
  bool contains(const T& x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool overlaps(const Interval& o) const { return !(o.hi < lo || hi < o.lo); }
  bool is_point() const { return lo == hi; }

  friend Interval operator+(const Interval& a, const Interval& b) { return {a.lo + b.lo, a.hi + b.hi}; }
  friend Interval operator-(const Interval& a, const Interval& b) { return {a.lo - b.hi, a.hi - b.lo}; }
  friend Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }
  friend Interval operator*(const Interval& a, const Interval& b) {
    T p[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {*std::min_element(p, p + 4), *std::max_element(p, p + 4)};
  }
  friend Interval operator*(const T& s, const Interval& a) {
    return s < 0 ? Interval(s * a.hi, s * a.lo) : Interval(s * a.lo, s * a.hi);
  }
  friend Interval operator*(const Interval& a, const T& s) { return s * a; }
  friend Interval operator/(const Interval& a, const T& s) {
    if (s == 0) throw Error(ErrorCode::InvalidArgument, "interval division by zero");
    return (T(1) / s) * a;
  }
  Interval& operator+=(const Interval& o) { return *this = *this + o; }
  Interval& operator*=(const Interval& o) { return *this = *this * o; }

  friend bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }

  friend std::ostream& operator<<(std::ostream& os, const Interval& a) {
    return os << "[" << a.lo << ", " << a.hi << "]";
  }

 private:
  static T tsflow_abs(const T& x) { return x < 0 ? T(-x) : x; }
};

template <typename T>
Interval<T> hull(const Interval<T>& a, const Interval<T>& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Intersection; callers guarantee overlap (both sides enclose the same true value).
template <typename T>
Interval<T> intersect(const Interval<T>& a, const Interval<T>& b) {
  T lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
  if (hi < lo) throw Error(ErrorCode::InvalidArgument, "disjoint enclosures cannot be intersected");
  return {lo, hi};
}

template <typename T>
Interval<T> pow(const Interval<T>& a, unsigned e) {
  if (e == 0) return Interval<T>(T(1));
  T l = a.lo, h = a.hi;
  T pl(1), ph(1);
  for (unsigned i = 0; i < e; ++i) {
    pl *= l;
    ph *= h;
  }
  if (e % 2 == 1) return {pl, ph};
  if (a.contains(T(0))) return {T(0), std::max(pl, ph)};
  return {std::min(pl, ph), std::max(pl, ph)};
}

// Certified enclosure of a Koopman matrix element.
using CorrelationInterval = Interval<Rational>;

}  // namespace tsflow
