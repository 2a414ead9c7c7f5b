#pragma once

// Exact rational scalars used for all tower geometry and certified bounds.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "tsflow/error.hpp"

namespace tsflow {

// Expression templates off: values are always materialized, so `auto` and
// std::min/std::max behave as for built-in types.
using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                             boost::multiprecision::et_off>;
using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                               boost::multiprecision::et_off>;

inline BigInt numerator(const Rational& q) { return boost::multiprecision::numerator(q); }
inline BigInt denominator(const Rational& q) { return boost::multiprecision::denominator(q); }

inline Rational abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

inline std::size_t bit_length(const BigInt& v) {
  if (v == 0) return 0;
  BigInt a = v < 0 ? BigInt(-v) : v;
  return boost::multiprecision::msb(a) + 1;
}

inline BigInt to_bigint(__int128 v) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1u
                            : static_cast<unsigned __int128>(v);
  BigInt hi = static_cast<std::uint64_t>(u >> 64);
  BigInt r = (hi << 64) + BigInt(static_cast<std::uint64_t>(u));
  return neg ? BigInt(-r) : r;
}

inline Rational from_int128(__int128 v) { return Rational(to_bigint(v)); }

inline __int128 to_int128(const BigInt& v) {
  if (bit_length(v) > 126) throw Error(ErrorCode::StageOverflow, "integer does not fit in 128 bits");
  const BigInt a = v < 0 ? BigInt(-v) : v;
  const auto hi = (a >> 64).convert_to<std::uint64_t>();
  const auto lo = (a & BigInt(UINT64_MAX)).convert_to<std::uint64_t>();
  const __int128 r = (static_cast<__int128>(hi) << 64) | static_cast<__int128>(lo);
  return v < 0 ? -r : r;
}

// floor for rationals (toward negative infinity)
inline BigInt floor(const Rational& q) {
  BigInt n = numerator(q), d = denominator(q);
  BigInt f = n / d;  // truncates toward zero
  if (n < 0 && f * d != n) f -= 1;
  return f;
}

inline BigInt ceil(const Rational& q) { return -floor(Rational(-q)); }

// nearest integer with ties to even
inline BigInt round_half_even(const Rational& q) {
  BigInt f = floor(q);
  Rational frac = q - Rational(f);
  if (frac < Rational(1, 2)) return f;
  if (frac > Rational(1, 2)) return f + 1;
  return (f % 2 == 0) ? f : BigInt(f + 1);
}

inline bool is_integer(const Rational& q) { return denominator(q) == 1; }

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

inline std::int64_t to_int64(const BigInt& v) {
  if (v > BigInt(INT64_MAX) || v < BigInt(INT64_MIN))
    throw Error(ErrorCode::StageOverflow, "integer does not fit in 64 bits");
  return v.convert_to<std::int64_t>();
}

inline std::size_t bit_length(const Rational& q) {
  return std::max(bit_length(numerator(q)), bit_length(denominator(q)));
}

// Canonical "p/q" form; integers carry an explicit "/1".
inline std::string to_string(const Rational& q) {
  return numerator(q).str() + "/" + denominator(q).str();
}

// Accepts "p/q", "p", and finite decimals such as "-0.125" or "3.5".
inline Rational parse_rational(std::string_view text) {
  auto fail = [&]() -> Error {
    return Error(ErrorCode::InvalidConfig, "not an exact rational: '" + std::string(text) + "'");
  };
  std::string s(text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  if (s.empty()) throw fail();

  auto parse_int = [&](const std::string& part, bool allow_sign) -> BigInt {
    std::size_t i = 0;
    if (allow_sign && (part[0] == '-' || part[0] == '+')) i = 1;
    if (i >= part.size()) throw fail();
    for (std::size_t k = i; k < part.size(); ++k)
      if (!std::isdigit(static_cast<unsigned char>(part[k]))) throw fail();
    BigInt v(part.substr(i));
    return part[0] == '-' ? BigInt(-v) : v;
  };

  if (auto slash = s.find('/'); slash != std::string::npos) {
    BigInt p = parse_int(s.substr(0, slash), true);
    BigInt q = parse_int(s.substr(slash + 1), false);
    if (q == 0) throw fail();
    return Rational(p, q);
  }
  if (auto dot = s.find('.'); dot != std::string::npos) {
    std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    if (!ip.empty() && (ip[0] == '-' || ip[0] == '+')) ip.erase(ip.begin());
    if (ip.empty()) ip = "0";
    if (fp.empty()) throw fail();
    BigInt whole = parse_int(ip, false);
    BigInt frac = parse_int(fp, false);
    BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(fp.size()));
    Rational r = Rational(whole) + Rational(frac, scale);
    return neg ? Rational(-r) : r;
  }
  return Rational(parse_int(s, true));
}

// Smallest rational with denominator `den` that is >= sqrt(x), x >= 0.
inline Rational sqrt_upper(const Rational& x, unsigned den = 1u << 20) {
  if (x <= 0) return Rational(0);
  BigInt d2 = BigInt(den) * den;
  BigInt target = ceil(x * Rational(d2));  // want k^2 >= x*den^2
  BigInt k = boost::multiprecision::sqrt(target);
  while (k * k < target) ++k;
  return Rational(k, den);
}

inline Rational pow(const Rational& base, unsigned e) {
  Rational r(1);
  for (unsigned i = 0; i < e; ++i) r *= base;
  return r;
}

inline Rational factorial(unsigned n) {
  BigInt f = 1;
  for (unsigned i = 2; i <= n; ++i) f *= i;
  return Rational(f);
}

}  // namespace tsflow
