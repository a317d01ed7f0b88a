// SPDX-License-Identifier: Apache-2.0
#include "fmala/dual.hpp"

#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "fmala/target_model.hpp"

namespace fmala {
namespace {

using D1 = Dual<double>;
using D2 = Dual2<double>;

void ExpectDual2(const D2& x, double v, double d1, double d2, double tol = 0.0) {
  EXPECT_NEAR(x.value, v, tol);
  EXPECT_NEAR(x.d1, d1, tol);
  EXPECT_NEAR(x.d2, d2, tol);
}

TEST(Dual, ConstantLiftHasZeroDerivatives) {
  const D1 a(3.5);
  EXPECT_EQ(a.d1, 0.0);
  const D2 b(3.5);
  EXPECT_EQ(b.d1, 0.0);
  EXPECT_EQ(b.d2, 0.0);
}

TEST(Dual, MultiplicationByConstant) {
  ExpectDual2(lift_binary(BinaryOp::kMul, D2(2, 1, 0), D2(3, 0, 0)), 6, 3, 0);
}

TEST(Dual, SquareOfVariable) {
  // (2 + t)^2 = 4 + 4t + t^2
  ExpectDual2(lift_binary(BinaryOp::kMul, D2(2, 1, 0), D2(2, 1, 0)), 4, 4, 2);
}

TEST(Dual, Reciprocal) {
  // 1/(2 + t): 1/2, -1/4, 2/8
  ExpectDual2(lift_binary(BinaryOp::kDiv, D2(1, 0, 0), D2(2, 1, 0)), 0.5, -0.25, 0.25, 1e-15);
}

TEST(Dual, AddSub) {
  ExpectDual2(lift_binary(BinaryOp::kAdd, D2(1, 2, 3), D2(4, 5, 6)), 5, 7, 9);
  ExpectDual2(lift_binary(BinaryOp::kSub, D2(1, 2, 3), D2(4, 5, 6)), -3, -3, -3);
}

TEST(Dual, DivisionByZeroIsDomainError) {
  EXPECT_THROW(lift_binary(BinaryOp::kDiv, D2(1, 0, 0), D2(0, 1, 0)), DomainError);
  EXPECT_THROW(D1(1.0) / D1(0.0, 1.0), DomainError);
  EXPECT_THROW(D2(1.0) / 0.0, DomainError);
}

TEST(Dual, UnaryExamples) {
  ExpectDual2(lift_unary(UnaryOp::kExp, D2(0, 1, 0)), 1, 1, 1);
  ExpectDual2(lift_unary(UnaryOp::kLog, D2(1, 1, 0)), 0, 1, -1);
  ExpectDual2(lift_unary(UnaryOp::kRelu, D2(-3, 1, 0)), 0, 0, 0);
  ExpectDual2(lift_unary(UnaryOp::kNeg, D2(1, 2, 3)), -1, -2, -3);
  ExpectDual2(lift_unary(UnaryOp::kSquare, D2(3, 1, 0)), 9, 6, 2);
}

TEST(Dual, DomainErrors) {
  EXPECT_THROW(lift_unary(UnaryOp::kLog, D2(0, 1, 0)), DomainError);
  EXPECT_THROW(lift_unary(UnaryOp::kLog, D2(-1, 1, 0)), DomainError);
  EXPECT_THROW(lift_unary(UnaryOp::kSqrt, D2(-1, 1, 0)), DomainError);
  EXPECT_THROW(log(D1(-2.0, 1.0)), DomainError);
}

TEST(Dual, KinksHaveZeroDerivativeAtZero) {
  ExpectDual2(lift_unary(UnaryOp::kRelu, D2(0, 1, 0)), 0, 0, 0);
  ExpectDual2(lift_unary(UnaryOp::kAbs, D2(0, 1, 0)), 0, 0, 0);
  ExpectDual2(lift_unary(UnaryOp::kAbs, D2(-2, 1, 0.5)), 2, -1, -0.5);
  ExpectDual2(lift_unary(UnaryOp::kRelu, D2(2, 1, 0.5)), 2, 1, 0.5);
}

// Each unary op against finite differences of g(a + a1 t + a2 t^2 / 2).
TEST(Dual, UnaryOpsMatchFiniteDifferences) {
  struct Case {
    UnaryOp op;
    std::function<double(double)> g;
    double x;
  };
  const Case cases[] = {
      {UnaryOp::kExp, [](double x) { return std::exp(x); }, 0.3},
      {UnaryOp::kLog, [](double x) { return std::log(x); }, 1.7},
      {UnaryOp::kSqrt, [](double x) { return std::sqrt(x); }, 2.2},
      {UnaryOp::kTanh, [](double x) { return std::tanh(x); }, -0.4},
      {UnaryOp::kSin, [](double x) { return std::sin(x); }, 0.9},
      {UnaryOp::kCos, [](double x) { return std::cos(x); }, 0.9},
      {UnaryOp::kSquare, [](double x) { return x * x; }, -1.3},
      {UnaryOp::kAbs, [](double x) { return std::abs(x); }, -1.3},
  };
  const double a1 = 0.7, a2 = -0.2;
  for (const Case& c : cases) {
    const D2 r = lift_unary(c.op, D2(c.x, a1, a2));
    auto path = [&](double t) { return c.g(c.x + a1 * t + 0.5 * a2 * t * t); };
    const double h1 = 1e-5, h2 = 1e-4;
    EXPECT_NEAR(r.value, c.g(c.x), 1e-15);
    EXPECT_NEAR(r.d1, (path(h1) - path(-h1)) / (2 * h1), 1e-8);
    EXPECT_NEAR(r.d2, (path(h2) - 2 * path(0) + path(-h2)) / (h2 * h2), 1e-5);
  }
}

TEST(Dual, SecondOrderProjectsToFirstOrderBitwise) {
  auto f = [](auto x, auto y) {
    using std::exp, std::log, std::sqrt, std::tanh;
    return exp(x * y) / (1.0 + square(x)) - tanh(y) * sqrt(x + 3.0) + log(x * x + 1.0);
  };
  const double x = 0.37, y = -1.21;
  const D1 r1 = f(D1::variable(x, 0.6), D1(y, -0.8));
  const D2 r2 = f(D2::variable(x, 0.6), D2(y, -0.8, 0.0));
  EXPECT_EQ(r2.first_order().value, r1.value);
  EXPECT_EQ(r2.first_order().d1, r1.d1);
  EXPECT_EQ(r1.value, f(x, y));
}

TEST(Dual, ComparisonsUseValues) {
  EXPECT_TRUE(D2(1, 5, 5) < D2(2, -5, 0));
  EXPECT_TRUE(D1(1, 3) == D1(1, -3));
  EXPECT_TRUE(D1(2, 0) > 1.0);
}

TEST(Dual, EigenReductionsPropagateDerivatives) {
  VectorX<D2> x(3);
  x << D2(1, 1, 0), D2(2, 0, 0), D2(3, 0, 0);
  const D2 s = x.squaredNorm();
  ExpectDual2(s, 14, 2, 2);
  const D2 dot = x.dot(x);
  ExpectDual2(dot, 14, 2, 2);
}

TEST(Dual, CompoundAssignment) {
  D2 a(2, 1, 0);
  a *= D2(2, 1, 0);
  a += 1.0;
  a -= D2(0, 0, 1);
  a /= 2.0;
  ExpectDual2(a, 2.5, 2, 0.5);
}

}  // namespace
}  // namespace fmala
