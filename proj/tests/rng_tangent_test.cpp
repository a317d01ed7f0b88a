// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fmala/rng.hpp"
#include "fmala/tangent.hpp"
#include "oracles.hpp"

namespace fmala {
namespace {

TEST(RngStream, SameKeySameSequence) {
  RngStream a(42, {3, StreamPurpose::kNoise});
  RngStream b(42, {3, StreamPurpose::kNoise});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(RngStream, DistinctKeysDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint64_t seed : {0, 1}) {
    for (std::uint64_t chain : {0, 1, 2}) {
      for (auto p : {StreamPurpose::kTangent, StreamPurpose::kNoise, StreamPurpose::kAccept, StreamPurpose::kInit}) {
        RngStream r(seed, {chain, p});
        first.insert(r());
      }
    }
  }
  EXPECT_EQ(first.size(), 24u);
}

// Reference values from an independent SplitMix64 implementation of the key derivation.
TEST(RngStream, GoldenPrefixIsStable) {
  RngStream a(0, {0, StreamPurpose::kTangent});
  EXPECT_EQ(a(), 0x0fef5b374d779f71ULL);
  EXPECT_EQ(a(), 0x475d75b7969bd227ULL);
  EXPECT_EQ(a(), 0x56a9a1e4fc294911ULL);
  EXPECT_EQ(a.counter(), 3u);
  RngStream b(42, {3, StreamPurpose::kNoise});
  EXPECT_EQ(b(), 0xf15b171e9ea69ecaULL);
  EXPECT_EQ(b(), 0xe3295f519fcc5710ULL);
  EXPECT_EQ(b(), 0x99cca1090ffdf339ULL);
}

TEST(RngStream, UniformOpenInterval) {
  RngStream r(7, {0, StreamPurpose::kAccept});
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStream, NormalMoments) {
  RngStream r(8, {0, StreamPurpose::kNoise});
  std::vector<double> xs(200000);
  for (double& x : xs) x = r.normal();
  const double se = 1.0 / std::sqrt(double(xs.size()));
  EXPECT_NEAR(oracle::mean(xs), 0.0, 5 * se);
  EXPECT_NEAR(oracle::variance(xs), 1.0, 5 * oracle::variance_standard_error(xs));
}

TEST(UnitSphere, OneDimensionalIsSign) {
  RngStream r(1, {0, StreamPurpose::kTangent});
  bool saw_plus = false, saw_minus = false;
  for (int i = 0; i < 100; ++i) {
    const TangentVector v = sample_unit_sphere(r, 1);
    ASSERT_EQ(std::abs(v.components[0]), 1.0);
    saw_plus |= v.components[0] > 0;
    saw_minus |= v.components[0] < 0;
  }
  EXPECT_TRUE(saw_plus && saw_minus);
}

TEST(UnitSphere, UnitNorm) {
  RngStream r(2, {0, StreamPurpose::kTangent});
  for (Eigen::Index d : {1, 2, 3, 10, 101, 1000}) {
    const TangentVector v = sample_unit_sphere(r, d);
    EXPECT_TRUE(v.unit);
    EXPECT_EQ(v.size(), d);
    EXPECT_NEAR(v.components.norm(), 1.0, 1e-12);
  }
}

TEST(UnitSphere, RejectsEmptyDimension) {
  RngStream r(2, {0, StreamPurpose::kTangent});
  EXPECT_THROW(sample_unit_sphere(r, 0), std::invalid_argument);
}

TEST(UnitSphere, CoordinateMoments) {
  RngStream r(3, {0, StreamPurpose::kTangent});
  const int n = 100000;
  const int d = 10;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sum_sq = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = sample_unit_sphere(r, d).components;
    sum += v;
    sum_sq += v.cwiseProduct(v);
  }
  // E v_i = 0 with Var v_i = 1/d; E v_i^2 = 1/d with Var v_i^2 = 2(d-1)/(d^2(d+2)).
  const double mean_se = std::sqrt(1.0 / d / n);
  const double sq_se = std::sqrt(2.0 * (d - 1) / (double(d) * d * (d + 2)) / n);
  for (int i = 0; i < d; ++i) {
    EXPECT_NEAR(sum[i] / n, 0.0, 4 * mean_se);
    EXPECT_NEAR(sum_sq[i] / n, 1.0 / d, 3 * sq_se);
  }
}

TEST(UnitSphere, DeterministicSequence) {
  RngStream a(9, {4, StreamPurpose::kTangent});
  RngStream b(9, {4, StreamPurpose::kTangent});
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = sample_unit_sphere(a, 13).components;
    const Eigen::VectorXd y = sample_unit_sphere(b, 13).components;
    ASSERT_EQ(0, std::memcmp(x.data(), y.data(), sizeof(double) * 13));
  }
}

TEST(ForwardGradient, Examples) {
  const TangentVector v{Eigen::Vector3d(0.6, 0.0, 0.8), true};
  EXPECT_TRUE(forward_gradient(0.0, v).isZero(0.0));
  const TangentVector one{Eigen::VectorXd::Ones(1), true};
  EXPECT_EQ(forward_gradient(2.5, one)[0], 2.5);
  EXPECT_TRUE(forward_gradient(2.0, v).isApprox(Eigen::Vector3d(3.6, 0.0, 4.8)));
}

TEST(ForwardGradient, UnbiasedForTwoDimensionalGradient) {
  RngStream r(4, {0, StreamPurpose::kTangent});
  const Eigen::Vector2d grad(3, 4);
  const int n = 1000000;
  std::vector<double> g0(n), g1(n);
  for (int i = 0; i < n; ++i) {
    const TangentVector v = sample_unit_sphere(r, 2);
    const Eigen::VectorXd g = forward_gradient(grad.dot(v.components), v);
    g0[i] = g[0];
    g1[i] = g[1];
  }
  EXPECT_NEAR(oracle::mean(g0), 3.0, 5 * std::sqrt(oracle::variance(g0) / n));
  EXPECT_NEAR(oracle::mean(g1), 4.0, 5 * std::sqrt(oracle::variance(g1) / n));
}

TEST(EstimatorMoments, Examples) {
  EstimatorMoments m = estimator_moments_analytic(Eigen::VectorXd::Constant(1, 2.0), 0);
  EXPECT_DOUBLE_EQ(m.mean, 2.0);
  EXPECT_DOUBLE_EQ(m.variance, 0.0);
  m = estimator_moments_analytic(Eigen::Vector2d(1, 0), 0);
  EXPECT_DOUBLE_EQ(m.mean, 0.5);
  EXPECT_DOUBLE_EQ(m.variance, 0.125);
  m = estimator_moments_analytic(Eigen::Vector2d(3, 4), 0);
  EXPECT_DOUBLE_EQ(m.mean, 1.5);
  EXPECT_DOUBLE_EQ(m.variance, 3.125);
  EXPECT_THROW(estimator_moments_analytic(Eigen::Vector2d(3, 4), 2), std::out_of_range);
}

TEST(EstimatorMoments, MonteCarloAgreement) {
  RngStream r(5, {0, StreamPurpose::kTangent});
  for (Eigen::Index d : {2, 5, 10, 50}) {
    const Eigen::VectorXd grad = r.normal_vector(d);
    const int n = 100000;
    std::vector<double> xs(n);
    for (int k = 0; k < n; ++k) {
      const TangentVector v = sample_unit_sphere(r, d);
      xs[k] = grad.dot(v.components) * v.components[0];
    }
    const EstimatorMoments m = estimator_moments_analytic(grad, 0);
    EXPECT_NEAR(oracle::mean(xs), m.mean, 5 * std::sqrt(oracle::variance(xs) / n)) << "D=" << d;
    EXPECT_NEAR(oracle::variance(xs), m.variance, 5 * oracle::variance_standard_error(xs)) << "D=" << d;
  }
}

TEST(EstimatorMoments, ScaledVarianceApproachesLimit) {
  double previous_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index d : {2, 5, 10, 50, 200, 1000}) {
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(d, 0.5);
    grad[0] = 2.0;
    const EstimatorMoments m = estimator_moments_analytic(grad, 0);
    const double limit = 2.0 * grad[0] * grad[0] + (grad.squaredNorm() - grad[0] * grad[0]);
    const double gap = std::abs(double(d) * d * m.variance - limit) / limit;
    EXPECT_LE(gap, 3.0 / (d + 2)) << "D=" << d;
    EXPECT_LT(gap, previous_gap);
    previous_gap = gap;
  }
}

}  // namespace
}  // namespace fmala
