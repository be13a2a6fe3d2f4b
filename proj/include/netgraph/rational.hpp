#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "netgraph/errors.hpp"

// Exact rational helpers used for grid commensurability and period
// arithmetic. Doubles enter as measured travel times; everything downstream
// (gcd of cycle sums, lcm of denominators) is integer arithmetic on the
// reconstructed fractions, so periods come out exact.

namespace netgraph {

struct Rational {
  long long num = 0;
  long long den = 1;  // invariant: den > 0, gcd(|num|, den) = 1

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
};

inline Rational make_rational(long long num, long long den) {
  if (den == 0) throw ShapeMismatch("rational with zero denominator");
  if (den < 0) { num = -num; den = -den; }
  long long g = std::gcd(std::llabs(num), den);
  if (g > 1) { num /= g; den /= g; }
  return Rational{num, den};
}

inline Rational rational_add(const Rational& a, const Rational& b) {
  __int128 num = static_cast<__int128>(a.num) * b.den +
                 static_cast<__int128>(b.num) * a.den;
  __int128 den = static_cast<__int128>(a.den) * b.den;
  __int128 g = num < 0 ? -num : num;
  __int128 d = den;
  while (d != 0) { __int128 t = g % d; g = d; d = t; }
  if (g > 1) { num /= g; den /= g; }
  if (num > INT64_MAX || num < INT64_MIN || den > INT64_MAX)
    throw LdqFails("rational addition overflow");
  return Rational{static_cast<long long>(num), static_cast<long long>(den)};
}

inline Rational rational_sub(const Rational& a, const Rational& b) {
  return rational_add(a, Rational{-b.num, b.den});
}

inline Rational rational_abs(const Rational& a) {
  return Rational{std::llabs(a.num), a.den};
}

// gcd/lcm on the positive rationals, as generators of subgroups of (R, +):
// gcd(a/b, c/d) is the largest rational dividing both.
inline Rational rational_gcd(const Rational& a, const Rational& b) {
  if (a.num == 0) return b;
  if (b.num == 0) return a;
  __int128 l = static_cast<__int128>(a.den) / std::gcd(a.den, b.den) * b.den;
  __int128 na = static_cast<__int128>(std::llabs(a.num)) * (l / a.den);
  __int128 nb = static_cast<__int128>(std::llabs(b.num)) * (l / b.den);
  while (nb != 0) { __int128 t = na % nb; na = nb; nb = t; }
  if (na > INT64_MAX || l > INT64_MAX)
    throw LdqFails("rational gcd overflow; denominators too large");
  return make_rational(static_cast<long long>(na), static_cast<long long>(l));
}

inline Rational rational_lcm(const Rational& a, const Rational& b) {
  if (a.num == 0 || b.num == 0) return Rational{0, 1};
  // lcm(a, b) = a*b / gcd(a, b)
  Rational g = rational_gcd(a, b);
  __int128 num = static_cast<__int128>(std::llabs(a.num)) * std::llabs(b.num) * g.den;
  __int128 den = static_cast<__int128>(a.den) * b.den * std::llabs(g.num);
  __int128 gg = num; __int128 dd = den;
  while (dd != 0) { __int128 t = gg % dd; gg = dd; dd = t; }
  num /= gg; den /= gg;
  if (num > INT64_MAX || den > INT64_MAX) throw LdqFails("rational lcm overflow");
  return make_rational(static_cast<long long>(num), static_cast<long long>(den));
}

// Smallest-denominator continued-fraction convergent of x within `tol`.
// Returns nullopt when no convergent with denominator <= max_den is that
// close — which is how irrational inputs are detected. The cap defaults to
// 1e4: convergents of typical irrationals (e.g. sqrt(2)) only reach 1e-9
// accuracy beyond that, while genuine small fractions terminate immediately.
inline std::optional<Rational> reconstruct_rational(double x, double tol = 1e-9,
                                                    long long max_den = 10000) {
  if (!std::isfinite(x)) return std::nullopt;
  const double sign = x < 0 ? -1.0 : 1.0;
  double y = std::fabs(x);
  long long p_prev = 1, q_prev = 0;  // convergent recurrence seeds
  long long p = static_cast<long long>(std::floor(y)), q = 1;
  double frac = y - std::floor(y);
  for (int it = 0; it < 64; ++it) {
    double err = std::fabs(y - static_cast<double>(p) / static_cast<double>(q));
    if (err <= tol)
      return make_rational(static_cast<long long>(sign) * p, q);
    if (frac < 1e-15) break;
    double inv = 1.0 / frac;
    double a_f = std::floor(inv);
    if (a_f > 4e18) break;
    long long a = static_cast<long long>(a_f);
    frac = inv - a_f;
    __int128 p_next = static_cast<__int128>(a) * p + p_prev;
    __int128 q_next = static_cast<__int128>(a) * q + q_prev;
    if (q_next > max_den || p_next > INT64_MAX) break;
    p_prev = p; q_prev = q;
    p = static_cast<long long>(p_next);
    q = static_cast<long long>(q_next);
  }
  double err = std::fabs(y - static_cast<double>(p) / static_cast<double>(q));
  if (q <= max_den && err <= tol)
    return make_rational(static_cast<long long>(sign) * p, q);
  return std::nullopt;
}

// Largest g > 0 such that every value is an integer multiple of g, assuming
// pairwise-commensurable inputs. nullopt when some ratio fails rational
// reconstruction.
inline std::optional<double> commensurable_gcd(const std::vector<double>& values,
                                               double tol = 1e-9,
                                               long long max_den = 10000) {
  if (values.empty()) return std::nullopt;
  for (double v : values)
    if (!(v > 0)) return std::nullopt;
  const double base = values.front();
  std::vector<Rational> ratios;
  ratios.reserve(values.size());
  for (double v : values) {
    auto r = reconstruct_rational(v / base, tol, max_den);
    if (!r) return std::nullopt;
    ratios.push_back(*r);
  }
  Rational g{0, 1};
  for (const Rational& r : ratios) g = rational_gcd(g, r);
  return base * g.value();  // values[i] = (ratios[i]/g) * (base*g), integer multiple
}

}  // namespace netgraph
