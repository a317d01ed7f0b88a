// SPDX-License-Identifier: Apache-2.0
#include "fmala/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fmala/rng.hpp"
#include "fmala/targets.hpp"

namespace fmala {
namespace {

Eigen::VectorXd iid_normal(std::uint64_t seed, Eigen::Index n) {
  RngStream rng(seed, {0, StreamPurpose::kNoise});
  return rng.normal_vector(n);
}

Eigen::VectorXd ar1(std::uint64_t seed, Eigen::Index n, double phi) {
  RngStream rng(seed, {0, StreamPurpose::kNoise});
  Eigen::VectorXd x(n);
  x[0] = rng.normal() / std::sqrt(1 - phi * phi);
  for (Eigen::Index t = 1; t < n; ++t) x[t] = phi * x[t - 1] + rng.normal();
  return x;
}

TEST(GaussianKl, Examples) {
  EXPECT_EQ(gaussian_kl_from_moments(0, 9, 0, 9), 0.0);
  EXPECT_NEAR(gaussian_kl_from_moments(0, 18, 0, 9), 0.5 * (2 - 1 + std::log(0.5)), 1e-15);
  EXPECT_NEAR(gaussian_kl_from_moments(0, 18, 0, 9), 0.15343, 1e-5);
  EXPECT_DOUBLE_EQ(gaussian_kl_from_moments(3, 9, 0, 9), 0.5);
  EXPECT_THROW(gaussian_kl_from_moments(0, 0, 0, 9), DegenerateSampleError);
}

TEST(GaussianKl, FitUsesUnbiasedVariance) {
  const Eigen::VectorXd x = Eigen::Vector4d(-1, 0, 1, 2);
  const double var = (x.array() - 0.5).square().sum() / 3.0;
  EXPECT_DOUBLE_EQ(gaussian_fit_kl(x, 0, 9), gaussian_kl_from_moments(0.5, var, 0, 9));
  EXPECT_THROW(gaussian_fit_kl(Eigen::VectorXd::Constant(5, 1.0), 0, 9), DegenerateSampleError);
  EXPECT_THROW(gaussian_fit_kl(Eigen::VectorXd::Constant(1, 1.0), 0, 9), DegenerateSampleError);
}

TEST(GaussianKl, NonNegativeOverRandomMoments) {
  RngStream rng(1, {0, StreamPurpose::kNoise});
  for (int k = 0; k < 1000; ++k) {
    const double mq = rng.normal(), mp = rng.normal();
    const double vq = std::exp(rng.normal()), vp = std::exp(rng.normal());
    ASSERT_GE(gaussian_kl_from_moments(mq, vq, mp, vp), 0.0);
  }
  EXPECT_NEAR(gaussian_kl_from_moments(1.5, 2.25, 1.5, 2.25), 0.0, 1e-12);
}

TEST(Ess, IidIsCloseToN) {
  const Eigen::VectorXd x = iid_normal(2, 10000);
  const double e = ess(x);
  EXPECT_GE(e, 8000.0);
  EXPECT_LE(e, 10000.0);
}

TEST(Ess, Ar1MatchesIntegratedAutocorrelation) {
  const double phi = 0.9;
  const Eigen::VectorXd x = ar1(3, 100000, phi);
  const double expected = x.size() * (1 - phi) / (1 + phi);
  EXPECT_NEAR(ess(x), expected, 0.2 * expected);
}

TEST(Ess, AlternatingChainIsCappedAtN) {
  Eigen::VectorXd x(100);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
  EXPECT_EQ(ess(x), 100.0);
}

TEST(Ess, Errors) {
  EXPECT_THROW(ess(Eigen::VectorXd::Constant(50, 2.0)), DegenerateSampleError);
  EXPECT_THROW(ess(Eigen::VectorXd::Zero(5)), DegenerateSampleError);
}

TEST(Ess, AffineInvariant) {
  const Eigen::VectorXd x = ar1(4, 5000, 0.7);
  const double base = ess(x);
  EXPECT_NEAR(ess((3.0 * x.array() - 7.0).matrix()), base, 1e-8 * base);
  EXPECT_NEAR(ess((-0.5 * x.array() + 100.0).matrix()), base, 1e-8 * base);
}

std::vector<Eigen::VectorXd> golden_chains(bool rounded) {
  std::vector<Eigen::VectorXd> chains;
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd x(20);
    for (int t = 0; t < 20; ++t) {
      x[t] = std::sin(0.7 * t + c) + 0.3 * std::cos(1.3 * t * (c + 1));
      if (rounded) x[t] = std::nearbyint(x[t] * 10.0) / 10.0;
    }
    chains.push_back(x);
  }
  return chains;
}

TEST(BulkEss, ReferenceValues) {
  // Reference values from an independent rank-normalized split-chain implementation.
  EXPECT_NEAR(bulk_ess(golden_chains(false)), 33.918890347663705, 1e-9);
  EXPECT_NEAR(bulk_ess(golden_chains(true)), 33.154418222595915, 1e-9);
}

TEST(BulkEss, IidChains) {
  std::vector<Eigen::VectorXd> chains;
  for (std::uint64_t c = 0; c < 4; ++c) chains.push_back(iid_normal(10 + c, 2500));
  const double e = bulk_ess(chains);
  EXPECT_GE(e, 8000.0);
  EXPECT_LE(e, 10000.0);
}

TEST(BulkEss, Ar1Chains) {
  std::vector<Eigen::VectorXd> chains;
  for (std::uint64_t c = 0; c < 5; ++c) chains.push_back(ar1(20 + c, 20000, 0.9));
  const double expected = 100000.0 / 19.0;
  EXPECT_NEAR(bulk_ess(chains), expected, 0.2 * expected);
}

TEST(BulkEss, DisagreeingChainsAreFewSamples) {
  std::vector<Eigen::VectorXd> chains;
  for (std::uint64_t c = 0; c < 4; ++c) chains.push_back((iid_normal(30 + c, 1000).array() + 10.0 * c).matrix());
  EXPECT_LT(bulk_ess(chains), 50.0);
}

TEST(BulkEss, EdgeCases) {
  EXPECT_EQ(bulk_ess({Eigen::VectorXd::Constant(20, 1.0), Eigen::VectorXd::Constant(20, 1.0)}), 1.0);
  EXPECT_THROW(bulk_ess({Eigen::VectorXd::Zero(5)}), DegenerateSampleError);
  EXPECT_THROW(bulk_ess({Eigen::VectorXd::Zero(20), Eigen::VectorXd::Zero(30)}), std::invalid_argument);
  EXPECT_THROW(bulk_ess({}), DegenerateSampleError);
}

TEST(BulkEss, AffineAndOrderInvariant) {
  std::vector<Eigen::VectorXd> chains;
  for (std::uint64_t c = 0; c < 3; ++c) chains.push_back(ar1(40 + c, 3000, 0.5));
  const double base = bulk_ess(chains);
  std::vector<Eigen::VectorXd> scaled;
  for (const auto& c : chains) scaled.push_back((2.0 * c.array() + 1.0).matrix());
  EXPECT_NEAR(bulk_ess(scaled), base, 1e-9 * base);
  std::reverse(chains.begin(), chains.end());
  EXPECT_NEAR(bulk_ess(chains), base, 1e-9 * base);
}

TEST(Ece, Examples) {
  Eigen::MatrixXd onehot(4, 2);
  onehot << 1, 0, 0, 1, 1, 0, 0, 1;
  EXPECT_EQ(ece(onehot, {0, 1, 0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(ece(onehot, {0, 1, 1, 0}), 0.5);
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 2, 0.5);
  for (int bins : {1, 10, 100}) EXPECT_NEAR(ece(uniform, {0, 1, 0, 1}, bins), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(accuracy(onehot, {0, 1, 1, 0}), 0.5);
}

TEST(Ece, RangeAndPermutationInvariance) {
  RngStream rng(5, {0, StreamPurpose::kNoise});
  const int n = 300;
  Eigen::MatrixXd p(n, 3);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Array3d e = (2.0 * rng.normal_vector(3)).array().exp();
    p.row(i) = (e / e.sum()).matrix().transpose();
    y[i] = static_cast<int>(rng() % 3);
  }
  const double base = ece(p, y);
  EXPECT_GE(base, 0.0);
  EXPECT_LE(base, 1.0);
  Eigen::MatrixXd q = p.colwise().reverse();
  std::vector<int> z(y.rbegin(), y.rend());
  EXPECT_NEAR(ece(q, z), base, 1e-14);
}

TEST(Ece, RejectsBadInput) {
  Eigen::MatrixXd p(1, 2);
  p << 0.7, 0.7;
  EXPECT_THROW(ece(p, {0}), std::invalid_argument);
  p << 0.3, 0.7;
  EXPECT_THROW(ece(p, {2}), std::invalid_argument);
  EXPECT_THROW(ece(p, {0, 1}), std::invalid_argument);
}

TEST(KsTest, AcceptsNormalRejectsShifted) {
  const Eigen::VectorXd x = iid_normal(6, 5000);
  EXPECT_GT(ks_test_normal(x).p_value, 0.001);
  EXPECT_LT(ks_test_normal((x.array() + 0.2).matrix()).p_value, 0.001);
  EXPECT_LT(ks_test_normal((1.2 * x).eval()).p_value, 0.001);
}

RunReport report_from(const Eigen::MatrixXd& samples, long steps, long accepted, std::uint64_t chain = 0) {
  RunReport r;
  r.chain = chain;
  r.dimension = samples.cols();
  r.samples = samples;
  r.sample_log_density = Eigen::VectorXd::Zero(samples.rows());
  r.steps = steps;
  r.accepted = accepted;
  return r;
}

TEST(Summarize, SingleSample) {
  const ChainSummary s = summarize({report_from(Eigen::RowVector2d(1.5, -2.0), 1, 1)}, std::nullopt);
  EXPECT_EQ(s.mean, Eigen::Vector2d(1.5, -2.0));
  EXPECT_FALSE(s.variance.has_value());
  EXPECT_FALSE(s.ess.has_value());
}

TEST(Summarize, AcceptanceRateIsExactRatio) {
  const Eigen::MatrixXd x = iid_normal(7, 40).reshaped(20, 2);
  const ChainSummary s = summarize({report_from(x, 30, 7), report_from(x, 70, 20, 1)}, std::nullopt);
  EXPECT_EQ(*s.acceptance_rate, 27.0 / 100.0);
  EXPECT_EQ(s.samples, 40);
}

TEST(Summarize, FunnelRunPopulatesKl) {
  const TargetModel f = make_funnel(10);
  SamplerConfig cfg;
  cfg.algorithm = Algorithm::kPcLineFmala;
  cfg.step_size = 1.0;
  cfg.max_iterations = 2000;
  std::vector<RunReport> chains;
  for (std::uint64_t c = 0; c < 5; ++c) chains.push_back(run_chain(f, cfg, 0, c));
  const ChainSummary s = summarize(chains, f.marginal());
  ASSERT_TRUE(s.kl.has_value());
  EXPECT_GE(*s.kl, 0.0);
  ASSERT_TRUE(s.ess_marginal.has_value());
  EXPECT_GT(*s.ess_marginal, 0.0);
  EXPECT_LE(*s.ess_marginal, 10000.0);
  EXPECT_TRUE(s.errors.empty());
  const ChainSummary again = summarize(chains, f.marginal());
  EXPECT_EQ(*again.kl, *s.kl);
  EXPECT_EQ(*again.ess, *s.ess);
}

TEST(Summarize, StuckChainReportsKlError) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(30, 2, 0.5);
  const ChainSummary s = summarize({report_from(x, 30, 0)}, MarginalInfo{1, 0.0, 9.0});
  EXPECT_FALSE(s.kl.has_value());
  EXPECT_FALSE(s.errors.empty());
  EXPECT_EQ(*s.ess_marginal, 1.0);
}

}  // namespace
}  // namespace fmala
