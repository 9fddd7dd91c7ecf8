#pragma once

// Forward-mode dual numbers. Nesting Dual<Dual<double>> yields second
// directional derivatives; the library uses up to three levels.

#include <cmath>
#include <type_traits>

namespace cforge {

template <class T>
struct Dual {
  T value{};
  T derivative{};

  constexpr Dual() = default;
  constexpr Dual(T v, T d) : value(v), derivative(d) {}
  template <class U>
    requires std::is_arithmetic_v<U>
  constexpr Dual(U v) : value(static_cast<T>(v)), derivative(static_cast<T>(0)) {}
  constexpr Dual(const T& v)
    requires(!std::is_arithmetic_v<T>)
      : value(v), derivative(0.0) {}
};

using DualValue = Dual<double>;
using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

template <class T>
struct dual_depth : std::integral_constant<int, 0> {};
template <class T>
struct dual_depth<Dual<T>> : std::integral_constant<int, 1 + dual_depth<T>::value> {};

constexpr double primal(double x) noexcept { return x; }
template <class T>
constexpr double primal(const Dual<T>& x) noexcept {
  return primal(x.value);
}

// Arithmetic

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.value + b.value, a.derivative + b.derivative};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.value - b.value, a.derivative - b.derivative};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a) {
  return {-a.value, -a.derivative};
}
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.value * b.value, a.value * b.derivative + b.value * a.derivative};
}
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.value / b.value;
  return {q, (a.derivative - q * b.derivative) / b.value};
}

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, double b) {
  return {a.value + b, a.derivative};
}
template <class T>
constexpr Dual<T> operator+(double a, const Dual<T>& b) {
  return {a + b.value, b.derivative};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, double b) {
  return {a.value - b, a.derivative};
}
template <class T>
constexpr Dual<T> operator-(double a, const Dual<T>& b) {
  return {a - b.value, -b.derivative};
}
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, double b) {
  return {a.value * b, a.derivative * b};
}
template <class T>
constexpr Dual<T> operator*(double a, const Dual<T>& b) {
  return {a * b.value, a * b.derivative};
}
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, double b) {
  return {a.value / b, a.derivative / b};
}
template <class T>
constexpr Dual<T> operator/(double a, const Dual<T>& b) {
  return Dual<T>(a) / b;
}

template <class T>
constexpr Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
  return a = a + b;
}
template <class T>
constexpr Dual<T>& operator-=(Dual<T>& a, const Dual<T>& b) {
  return a = a - b;
}
template <class T>
constexpr Dual<T>& operator*=(Dual<T>& a, const Dual<T>& b) {
  return a = a * b;
}
template <class T>
constexpr Dual<T>& operator/=(Dual<T>& a, const Dual<T>& b) {
  return a = a / b;
}

// Elementary functions (found by ADL next to std:: overloads for double)

template <class T>
Dual<T> sin(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {sin(x.value), cos(x.value) * x.derivative};
}
template <class T>
Dual<T> cos(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return {cos(x.value), -sin(x.value) * x.derivative};
}
template <class T>
Dual<T> tan(const Dual<T>& x) {
  using std::tan;
  T t = tan(x.value);
  return {t, (T(1.0) + t * t) * x.derivative};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  T e = exp(x.value);
  return {e, e * x.derivative};
}
template <class T>
Dual<T> log(const Dual<T>& x) {
  using std::log;
  return {log(x.value), x.derivative / x.value};
}
template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  T s = sqrt(x.value);
  return {s, x.derivative / (2.0 * s)};
}
// Derivative of |x| at 0 is taken as 0.
template <class T>
Dual<T> abs(const Dual<T>& x) {
  double p = primal(x.value);
  if (p > 0) return x;
  if (p < 0) return -x;
  return {x.value, T(0.0)};
}

// x^n for integer n by repeated squaring; exact in the dual parts.
template <class T>
T ipow(const T& x, long n) {
  if (n < 0) return T(1.0) / ipow(x, -n);
  T result(1.0);
  T base = x;
  while (n > 0) {
    if (n & 1) result = result * base;
    base = base * base;
    n >>= 1;
  }
  return result;
}

}  // namespace cforge
