// SPDX-License-Identifier: Apache-2.0
//
// Truncated-Taylor scalars for forward-mode differentiation along one tangent.
//
//   Dual<T>  carries (f, f')         with f' = d/dt f(x + t v) at t = 0
//   Dual2<T> carries (f, f', f'')    with f'' = d^2/dt^2 f(x + t v) at t = 0
//
// Both are plain value types; no tape, no shared state. Every elementary
// operation is routed through a single chain-rule helper so that the first-
// order part of a Dual2 computation is produced by exactly the same floating-
// point expressions as the corresponding Dual computation.

#pragma once

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace fmala {

/// Raised when an operation leaves the domain on which its derivatives exist.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class BinaryOp { kAdd, kSub, kMul, kDiv };
enum class UnaryOp { kNeg, kExp, kLog, kSqrt, kTanh, kRelu, kAbs, kSin, kCos, kSquare };

template <class T>
struct Dual {
  T value{0};
  T d1{0};

  constexpr Dual() = default;
  // Implicit lift of constants: derivative exactly zero.
  constexpr Dual(T v) : value(v), d1(0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T v, T dv) : value(v), d1(dv) {}

  static constexpr Dual variable(T v, T tangent) { return {v, tangent}; }
};

template <class T>
struct Dual2 {
  T value{0};
  T d1{0};
  T d2{0};

  constexpr Dual2() = default;
  constexpr Dual2(T v) : value(v), d1(0), d2(0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual2(T v, T dv, T ddv) : value(v), d1(dv), d2(ddv) {}

  static constexpr Dual2 variable(T v, T tangent) { return {v, tangent, T(0)}; }

  /// Drops the second-order part.
  constexpr Dual<T> first_order() const { return {value, d1}; }
};

template <class S>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
struct is_dual<Dual2<T>> : std::true_type {};
template <class S>
inline constexpr bool is_dual_v = is_dual<S>::value;

namespace detail {

// g(a) with g = (g0, g1, g2) evaluated at a.value.
template <class T>
constexpr Dual<T> chain(const Dual<T>& a, T g0, T g1, T /*g2*/) {
  return {g0, g1 * a.d1};
}
template <class T>
constexpr Dual2<T> chain(const Dual2<T>& a, T g0, T g1, T g2) {
  return {g0, g1 * a.d1, g2 * a.d1 * a.d1 + g1 * a.d2};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary arithmetic.

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.value + b.value, a.d1 + b.d1};
}
template <class T>
constexpr Dual2<T> operator+(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.value - b.value, a.d1 - b.d1};
}
template <class T>
constexpr Dual2<T> operator-(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1};
}
template <class T>
constexpr Dual2<T> operator*(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + T(2) * a.d1 * b.d1 + a.value * b.d2};
}

template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  if (b.value == T(0)) throw DomainError("div: divisor value is zero");
  const T q = a.value / b.value;
  return {q, (a.d1 - q * b.d1) / b.value};
}
template <class T>
Dual2<T> operator/(const Dual2<T>& a, const Dual2<T>& b) {
  if (b.value == T(0)) throw DomainError("div: divisor value is zero");
  const T q = a.value / b.value;
  const T q1 = (a.d1 - q * b.d1) / b.value;
  return {q, q1, (a.d2 - T(2) * q1 * b.d1 - q * b.d2) / b.value};
}

// Mixed with plain constants: lift, then use the dual rule.
#define FMALA_DUAL_MIXED_OPS(DUAL)                                                   \
  template <class T> constexpr DUAL<T> operator+(const DUAL<T>& a, T b) { return a + DUAL<T>(b); } \
  template <class T> constexpr DUAL<T> operator+(T a, const DUAL<T>& b) { return DUAL<T>(a) + b; } \
  template <class T> constexpr DUAL<T> operator-(const DUAL<T>& a, T b) { return a - DUAL<T>(b); } \
  template <class T> constexpr DUAL<T> operator-(T a, const DUAL<T>& b) { return DUAL<T>(a) - b; } \
  template <class T> constexpr DUAL<T> operator*(const DUAL<T>& a, T b) { return a * DUAL<T>(b); } \
  template <class T> constexpr DUAL<T> operator*(T a, const DUAL<T>& b) { return DUAL<T>(a) * b; } \
  template <class T> DUAL<T> operator/(const DUAL<T>& a, T b) { return a / DUAL<T>(b); }           \
  template <class T> DUAL<T> operator/(T a, const DUAL<T>& b) { return DUAL<T>(a) / b; }           \
  template <class T> constexpr DUAL<T>& operator+=(DUAL<T>& a, const DUAL<T>& b) { return a = a + b; } \
  template <class T> constexpr DUAL<T>& operator-=(DUAL<T>& a, const DUAL<T>& b) { return a = a - b; } \
  template <class T> constexpr DUAL<T>& operator*=(DUAL<T>& a, const DUAL<T>& b) { return a = a * b; } \
  template <class T> DUAL<T>& operator/=(DUAL<T>& a, const DUAL<T>& b) { return a = a / b; }           \
  template <class T> constexpr bool operator==(const DUAL<T>& a, const DUAL<T>& b) { return a.value == b.value; } \
  template <class T> constexpr bool operator!=(const DUAL<T>& a, const DUAL<T>& b) { return a.value != b.value; } \
  template <class T> constexpr bool operator<(const DUAL<T>& a, const DUAL<T>& b) { return a.value < b.value; }   \
  template <class T> constexpr bool operator>(const DUAL<T>& a, const DUAL<T>& b) { return a.value > b.value; }   \
  template <class T> constexpr bool operator<=(const DUAL<T>& a, const DUAL<T>& b) { return a.value <= b.value; } \
  template <class T> constexpr bool operator>=(const DUAL<T>& a, const DUAL<T>& b) { return a.value >= b.value; } \
  template <class T> constexpr DUAL<T>& operator+=(DUAL<T>& a, T b) { return a = a + DUAL<T>(b); }              \
  template <class T> constexpr DUAL<T>& operator-=(DUAL<T>& a, T b) { return a = a - DUAL<T>(b); }              \
  template <class T> constexpr DUAL<T>& operator*=(DUAL<T>& a, T b) { return a = a * DUAL<T>(b); }              \
  template <class T> DUAL<T>& operator/=(DUAL<T>& a, T b) { return a = a / DUAL<T>(b); }                        \
  template <class T> constexpr bool operator<(const DUAL<T>& a, T b) { return a.value < b; }                    \
  template <class T> constexpr bool operator>(const DUAL<T>& a, T b) { return a.value > b; }                    \
  template <class T> constexpr bool operator<(T a, const DUAL<T>& b) { return a < b.value; }                    \
  template <class T> constexpr bool operator>(T a, const DUAL<T>& b) { return a > b.value; }

FMALA_DUAL_MIXED_OPS(Dual)
FMALA_DUAL_MIXED_OPS(Dual2)
#undef FMALA_DUAL_MIXED_OPS

// ---------------------------------------------------------------------------
// Elementary functions. Each is written once over the generic chain helper.

template <class D, class = std::enable_if_t<is_dual_v<D>>>
constexpr D operator-(const D& a) {
  using T = decltype(a.value);
  return detail::chain(a, -a.value, T(-1), T(0));
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D exp(const D& a) {
  const auto e = std::exp(a.value);
  return detail::chain(a, e, e, e);
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D log(const D& a) {
  using T = decltype(a.value);
  if (!(a.value > T(0))) throw DomainError("log: argument value is not positive");
  const T inv = T(1) / a.value;
  return detail::chain(a, std::log(a.value), inv, -inv * inv);
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D sqrt(const D& a) {
  using T = decltype(a.value);
  if (a.value < T(0)) throw DomainError("sqrt: argument value is negative");
  const T s = std::sqrt(a.value);
  const T g1 = T(0.5) / s;
  return detail::chain(a, s, g1, -g1 / (T(2) * a.value));
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D tanh(const D& a) {
  using T = decltype(a.value);
  const T t = std::tanh(a.value);
  const T g1 = T(1) - t * t;
  return detail::chain(a, t, g1, T(-2) * t * g1);
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D sin(const D& a) {
  const auto s = std::sin(a.value);
  return detail::chain(a, s, std::cos(a.value), -s);
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
D cos(const D& a) {
  const auto c = std::cos(a.value);
  return detail::chain(a, c, -std::sin(a.value), -c);
}

// Kink at zero: derivative taken as 0 there.
template <class D, class = std::enable_if_t<is_dual_v<D>>>
constexpr D abs(const D& a) {
  using T = decltype(a.value);
  const T s = a.value > T(0) ? T(1) : (a.value < T(0) ? T(-1) : T(0));
  return detail::chain(a, a.value < T(0) ? -a.value : a.value, s, T(0));
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
constexpr D relu(const D& a) {
  using T = decltype(a.value);
  const bool on = a.value > T(0);
  return detail::chain(a, on ? a.value : T(0), on ? T(1) : T(0), T(0));
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
constexpr D square(const D& a) {
  return a * a;
}

template <class D, class = std::enable_if_t<is_dual_v<D>>>
constexpr bool isfinite(const D& a) {
  if constexpr (std::is_same_v<D, Dual2<decltype(a.value)>>) {
    return std::isfinite(a.value) && std::isfinite(a.d1) && std::isfinite(a.d2);
  } else {
    return std::isfinite(a.value) && std::isfinite(a.d1);
  }
}

// Plain-scalar counterparts so generic model code can call relu/square/isfinite
// unqualified on double as well.
inline double relu(double a) { return a > 0.0 ? a : 0.0; }
inline double square(double a) { return a * a; }
using std::isfinite;

// Enum-dispatched forms of the same rule table.
template <class D>
D lift_binary(BinaryOp op, const D& a, const D& b) {
  switch (op) {
    case BinaryOp::kAdd: return a + b;
    case BinaryOp::kSub: return a - b;
    case BinaryOp::kMul: return a * b;
    case BinaryOp::kDiv: return a / b;
  }
  throw std::invalid_argument("lift_binary: unknown op");
}

template <class D>
D lift_unary(UnaryOp op, const D& a) {
  switch (op) {
    case UnaryOp::kNeg: return -a;
    case UnaryOp::kExp: return exp(a);
    case UnaryOp::kLog: return log(a);
    case UnaryOp::kSqrt: return sqrt(a);
    case UnaryOp::kTanh: return tanh(a);
    case UnaryOp::kRelu: return relu(a);
    case UnaryOp::kAbs: return abs(a);
    case UnaryOp::kSin: return sin(a);
    case UnaryOp::kCos: return cos(a);
    case UnaryOp::kSquare: return square(a);
  }
  throw std::invalid_argument("lift_unary: unknown op");
}

template <class T>
std::ostream& operator<<(std::ostream& os, const Dual<T>& a) {
  return os << "(" << a.value << ", " << a.d1 << ")";
}
template <class T>
std::ostream& operator<<(std::ostream& os, const Dual2<T>& a) {
  return os << "(" << a.value << ", " << a.d1 << ", " << a.d2 << ")";
}

}  // namespace fmala

namespace Eigen {

template <class T>
struct NumTraits<fmala::Dual<T>> : NumTraits<T> {
  using Real = fmala::Dual<T>;
  using NonInteger = fmala::Dual<T>;
  using Nested = fmala::Dual<T>;
  using Literal = fmala::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 3
  };
};

template <class T>
struct NumTraits<fmala::Dual2<T>> : NumTraits<T> {
  using Real = fmala::Dual2<T>;
  using NonInteger = fmala::Dual2<T>;
  using Nested = fmala::Dual2<T>;
  using Literal = fmala::Dual2<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 3,
    AddCost = 3,
    MulCost = 6
  };
};

template <class T, class Op>
struct ScalarBinaryOpTraits<fmala::Dual<T>, T, Op> {
  using ReturnType = fmala::Dual<T>;
};
template <class T, class Op>
struct ScalarBinaryOpTraits<T, fmala::Dual<T>, Op> {
  using ReturnType = fmala::Dual<T>;
};
template <class T, class Op>
struct ScalarBinaryOpTraits<fmala::Dual2<T>, T, Op> {
  using ReturnType = fmala::Dual2<T>;
};
template <class T, class Op>
struct ScalarBinaryOpTraits<T, fmala::Dual2<T>, Op> {
  using ReturnType = fmala::Dual2<T>;
};

}  // namespace Eigen
