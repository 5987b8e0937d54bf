#pragma once

// Forward-mode dual numbers. Nest Dual<Dual<double>> for second derivatives.

#include <cmath>
#include <type_traits>

namespace phasekit {

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // tangent

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT: implicit from constants
  constexpr Dual(T value, T tangent) : v(value), d(tangent) {}

  template <class U = T, std::enable_if_t<!std::is_same_v<U, double>, int> = 0>
  constexpr Dual(const U& value) : v(value), d(0.0) {}  // NOLINT

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }
};

template <class T> struct is_dual : std::false_type {};
template <class T> struct is_dual<Dual<T>> : std::true_type {};

/// Innermost real value of a possibly nested carrier.
inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) { return primal(x.v); }

template <class T> Dual<T> operator+(const Dual<T>& a) { return a; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}

template <class T> Dual<T> operator+(const Dual<T>& a, double b) { return {a.v + b, a.d}; }
template <class T> Dual<T> operator+(double a, const Dual<T>& b) { return {a + b.v, b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, double b) { return {a.v - b, a.d}; }
template <class T> Dual<T> operator-(double a, const Dual<T>& b) { return {a - b.v, -b.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, double b) { return {a.v * b, a.d * b}; }
template <class T> Dual<T> operator*(double a, const Dual<T>& b) { return {a * b.v, a * b.d}; }
template <class T> Dual<T> operator/(const Dual<T>& a, double b) { return {a.v / b, a.d / b}; }
template <class T> Dual<T> operator/(double a, const Dual<T>& b) { return Dual<T>(a) / b; }

template <class T> bool operator<(const Dual<T>& a, const Dual<T>& b) { return primal(a) < primal(b); }
template <class T> bool operator>(const Dual<T>& a, const Dual<T>& b) { return primal(a) > primal(b); }
template <class T> bool operator<(const Dual<T>& a, double b) { return primal(a) < b; }
template <class T> bool operator>(const Dual<T>& a, double b) { return primal(a) > b; }
template <class T> bool operator<(double a, const Dual<T>& b) { return a < primal(b); }
template <class T> bool operator>(double a, const Dual<T>& b) { return a > primal(b); }

using std::cos;
using std::isfinite;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;
using std::tanh;

template <class T> Dual<T> exp(const Dual<T>& a) {
  T e = exp(a.v);
  return {e, e * a.d};
}
template <class T> Dual<T> log(const Dual<T>& a) { return {log(a.v), a.d / a.v}; }
template <class T> Dual<T> sin(const Dual<T>& a) { return {sin(a.v), cos(a.v) * a.d}; }
template <class T> Dual<T> cos(const Dual<T>& a) { return {cos(a.v), -sin(a.v) * a.d}; }
template <class T> Dual<T> sqrt(const Dual<T>& a) {
  T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T> Dual<T> tanh(const Dual<T>& a) {
  T t = tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}
template <class T> Dual<T> pow(const Dual<T>& a, double p) {
  if (p == 0.0) return Dual<T>(1.0);
  return {pow(a.v, p), p * pow(a.v, p - 1.0) * a.d};
}
/// General power a^p = exp(p log a); requires a > 0.
template <class T> Dual<T> pow(const Dual<T>& a, const Dual<T>& p) { return exp(p * log(a)); }
template <class T> Dual<T> pow(double a, const Dual<T>& p) { return exp(p * std::log(a)); }

template <class T> bool isfinite(const Dual<T>& a) { return isfinite(a.v) && isfinite(a.d); }

/// First and second order scalars used for Jacobians and Hessians.
using D1 = Dual<double>;
using D2 = Dual<Dual<double>>;

}  // namespace phasekit
