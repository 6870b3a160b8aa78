#pragma once

#include <cmath>
#include <type_traits>
#include <utility>

namespace fibredrive {

/// Second-order truncated Taylor scalar along one direction: a value plus
/// first and second directional derivatives. Arithmetic propagates the
/// triple exactly, so derivatives come out correct to machine precision.
///
/// Nesting (Dual2<Dual2<double>>, ...) differentiates expressions that
/// internally take derivatives themselves; each level of nesting buys one
/// more derivative order of a runtime-composed closure.
template <class T>
struct Dual2 {
  T v{};   ///< value
  T d{};   ///< first directional derivative
  T dd{};  ///< second directional derivative

  constexpr Dual2() = default;
  constexpr Dual2(T value) : v(std::move(value)), d{}, dd{} {}
  constexpr Dual2(T value, T d1) : v(std::move(value)), d(std::move(d1)), dd{} {}
  constexpr Dual2(T value, T d1, T d2)
      : v(std::move(value)), d(std::move(d1)), dd(std::move(d2)) {}

  // Constants embed recursively at any nesting level.
  template <class U = T>
    requires(!std::is_same_v<U, double>)
  constexpr Dual2(double c) : v(T(c)), d{}, dd{} {}

  Dual2& operator+=(const Dual2& o) {
    v = v + o.v;
    d = d + o.d;
    dd = dd + o.dd;
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v = v - o.v;
    d = d - o.d;
    dd = dd - o.dd;
    return *this;
  }
  Dual2& operator*=(const Dual2& o) { return *this = *this * o; }

  friend Dual2 operator+(const Dual2& a, const Dual2& b) {
    return {a.v + b.v, a.d + b.d, a.dd + b.dd};
  }
  friend Dual2 operator-(const Dual2& a, const Dual2& b) {
    return {a.v - b.v, a.d - b.d, a.dd - b.dd};
  }
  friend Dual2 operator-(const Dual2& a) { return {-a.v, -a.d, -a.dd}; }
  friend Dual2 operator+(const Dual2& a) { return a; }

  friend Dual2 operator*(const Dual2& a, const Dual2& b) {
    return {a.v * b.v, a.v * b.d + a.d * b.v,
            a.v * b.dd + 2.0 * (a.d * b.d) + a.dd * b.v};
  }
  friend Dual2 operator/(const Dual2& a, const Dual2& b) {
    T q = a.v / b.v;
    T q1 = (a.d - q * b.d) / b.v;
    T q2 = (a.dd - q * b.dd - 2.0 * (q1 * b.d)) / b.v;
    return {std::move(q), std::move(q1), std::move(q2)};
  }

  friend Dual2 operator+(const Dual2& a, double c) { return {a.v + c, a.d, a.dd}; }
  friend Dual2 operator+(double c, const Dual2& a) { return {a.v + c, a.d, a.dd}; }
  friend Dual2 operator-(const Dual2& a, double c) { return {a.v - c, a.d, a.dd}; }
  friend Dual2 operator-(double c, const Dual2& a) { return {c - a.v, -a.d, -a.dd}; }
  friend Dual2 operator*(const Dual2& a, double c) { return {a.v * c, a.d * c, a.dd * c}; }
  friend Dual2 operator*(double c, const Dual2& a) { return {a.v * c, a.d * c, a.dd * c}; }
  friend Dual2 operator/(const Dual2& a, double c) { return {a.v / c, a.d / c, a.dd / c}; }
  friend Dual2 operator/(double c, const Dual2& a) { return Dual2(c) / a; }
};

// Unary functions follow the chain rule
//   u(f) = (u(f.v), u'(f.v) f.d, u'(f.v) f.dd + u''(f.v) f.d^2).

template <class T>
Dual2<T> sqrt(const Dual2<T>& x) {
  using std::sqrt;
  T r = sqrt(x.v);
  T u1 = 0.5 / r;
  T u2 = -0.25 / (r * x.v);
  return {r, u1 * x.d, u1 * x.dd + u2 * (x.d * x.d)};
}

template <class T>
Dual2<T> exp(const Dual2<T>& x) {
  using std::exp;
  T e = exp(x.v);
  return {e, e * x.d, e * x.dd + e * (x.d * x.d)};
}

template <class T>
Dual2<T> log(const Dual2<T>& x) {
  using std::log;
  T u1 = 1.0 / x.v;
  T u2 = -u1 * u1;
  return {log(x.v), u1 * x.d, u1 * x.dd + u2 * (x.d * x.d)};
}

template <class T>
Dual2<T> sin(const Dual2<T>& x) {
  using std::cos;
  using std::sin;
  T s = sin(x.v);
  T c = cos(x.v);
  return {s, c * x.d, c * x.dd - s * (x.d * x.d)};
}

template <class T>
Dual2<T> cos(const Dual2<T>& x) {
  using std::cos;
  using std::sin;
  T s = sin(x.v);
  T c = cos(x.v);
  return {c, -s * x.d, -s * x.dd - c * (x.d * x.d)};
}

/// Integer power by repeated multiplication (exact at any nesting depth).
template <class T>
Dual2<T> pow(const Dual2<T>& x, int n) {
  if (n < 0) return Dual2<T>(1.0) / pow(x, -n);
  Dual2<T> r(1.0);
  Dual2<T> base = x;
  for (int k = n; k > 0; k >>= 1) {
    if (k & 1) r = r * base;
    if (k > 1) base = base * base;
  }
  return r;
}

template <class T>
Dual2<T> pow(const Dual2<T>& x, double e) {
  return exp(e * log(x));
}

/// Innermost value of a (possibly nested) scalar.
inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const Dual2<T>& x) {
  return scalar_value(x.v);
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual2<T>& x) {
  return all_finite(x.v) && all_finite(x.d) && all_finite(x.dd);
}

/// Nesting depth of a scalar type: 0 for double, 1 + depth(T) for Dual2<T>.
template <class S>
struct jet_depth : std::integral_constant<int, 0> {};
template <class T>
struct jet_depth<Dual2<T>> : std::integral_constant<int, jet_depth<T>::value + 1> {};
template <class S>
inline constexpr int jet_depth_v = jet_depth<S>::value;

/// Scalar type at a given nesting depth.
template <int K>
struct jet_scalar {
  using type = Dual2<typename jet_scalar<K - 1>::type>;
};
template <>
struct jet_scalar<0> {
  using type = double;
};
template <int K>
using jet_scalar_t = typename jet_scalar<K>::type;

/// Deepest nesting level type-erased fields are compiled for. Derivative
/// chains built at runtime (stabilisation rounds) consume one level each.
inline constexpr int kMaxJetDepth = 5;

}  // namespace fibredrive
