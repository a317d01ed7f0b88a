// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fmala/samplers.hpp"
#include "fmala/target_model.hpp"

namespace fmala {

/// A statistic is undefined for the given data (zero variance, too few samples).
class DegenerateSampleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// 1/2 (var_q/var_p + (mu_q - mu_p)^2/var_p - 1 + log(var_p/var_q))
double gaussian_kl_from_moments(double mu_q, double var_q, double mu_p, double var_p);

/// Fits (mu_q, var_q) to `samples` (unbiased variance) and returns
/// gaussian_kl_from_moments against N(mu_p, var_p).
double gaussian_fit_kl(const Eigen::Ref<const Eigen::VectorXd>& samples, double mu_p, double var_p);

/// Effective sample size N / (1 + 2 sum_k rho_k) with the autocorrelation sum
/// truncated by Geyer's initial monotone positive-pair sequence. Result lies
/// in (0, N]. Needs at least 10 samples and non-zero variance.
double ess(const Eigen::Ref<const Eigen::VectorXd>& samples);

/// Multi-chain effective sample size on rank-normalized, split chains (each
/// chain halved, ranks of the pooled draws mapped through the normal
/// quantile), with the between-chain variance folded into the
/// autocorrelation estimate and Geyer's initial positive and monotone
/// sequences. Chains must share a length of at least 10. A column that is
/// constant across every chain gives 1; the result is clipped to the total
/// draw count.
double bulk_ess(const std::vector<Eigen::VectorXd>& chains);

/// Expected calibration error over equal-width confidence bins.
double ece(const Eigen::Ref<const Eigen::MatrixXd>& probs, const std::vector<int>& labels, int bins = 100);

/// Fraction of rows whose argmax matches the label.
double accuracy(const Eigen::Ref<const Eigen::MatrixXd>& probs, const std::vector<int>& labels);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against N(mean, sd^2).
KsResult ks_test_normal(const Eigen::Ref<const Eigen::VectorXd>& samples, double mean = 0.0, double sd = 1.0);

struct ChainSummary {
  Eigen::Index samples = 0;  // pooled retained samples
  long steps = 0;
  long accepted = 0;
  std::optional<double> acceptance_rate;
  long floored = 0;
  long nonfinite_rejections = 0;
  Eigen::VectorXd mean;
  std::optional<Eigen::VectorXd> variance;   // needs >= 2 samples
  std::optional<Eigen::VectorXd> ess;        // per parameter, bulk_ess over chains
  std::optional<double> kl;                  // targets with a known marginal
  std::optional<double> ess_marginal;        // ESS of the marginal coordinate
  std::optional<double> ess_other_mean;      // mean ESS over the remaining coordinates
  double mean_log_density = 0.0;
  double wall_seconds_per_step = 0.0;
  std::vector<std::string> errors;
};

/// Pools the chains of one run. KL uses the pooled marginal; ESS is bulk_ess
/// over the run's chains (equal-length chains with at least 10 samples).
ChainSummary summarize(const std::vector<RunReport>& chains, const std::optional<MarginalInfo>& marginal);

}  // namespace fmala
