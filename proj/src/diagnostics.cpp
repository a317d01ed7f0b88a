// SPDX-License-Identifier: Apache-2.0
#include "fmala/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <unsupported/Eigen/FFT>

namespace fmala {
namespace {

// Biased autocovariance at every lag via zero-padded FFT.
Eigen::VectorXd autocovariance(const Eigen::VectorXd& centered) {
  const Eigen::Index n = centered.size();
  Eigen::Index m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(m), 0.0);
  std::copy(centered.data(), centered.data() + n, padded.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::norm(f);
  std::vector<double> back;
  fft.inv(back, freq);
  Eigen::VectorXd acov(n);
  for (Eigen::Index k = 0; k < n; ++k) acov[k] = back[static_cast<std::size_t>(k)] / static_cast<double>(n);
  return acov;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Asymptotic Kolmogorov distribution tail, with the usual small-n correction.
double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace

double gaussian_kl_from_moments(double mu_q, double var_q, double mu_p, double var_p) {
  if (!(var_q > 0.0) || !(var_p > 0.0)) throw DegenerateSampleError("gaussian KL: variance must be positive");
  const double dm = mu_q - mu_p;
  return 0.5 * (var_q / var_p + dm * dm / var_p - 1.0 + std::log(var_p / var_q));
}

double gaussian_fit_kl(const Eigen::Ref<const Eigen::VectorXd>& samples, double mu_p, double var_p) {
  const Eigen::Index n = samples.size();
  if (n < 2) throw DegenerateSampleError("gaussian_fit_kl: need at least 2 samples");
  const double mu_q = samples.mean();
  const double var_q = (samples.array() - mu_q).square().sum() / static_cast<double>(n - 1);
  if (!(var_q > 0.0)) throw DegenerateSampleError("gaussian_fit_kl: sample variance is zero");
  return gaussian_kl_from_moments(mu_q, var_q, mu_p, var_p);
}

double ess(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const Eigen::Index n = samples.size();
  if (n < 10) throw DegenerateSampleError("ess: need at least 10 samples");
  const Eigen::VectorXd centered = samples.array() - samples.mean();
  const Eigen::VectorXd acov = autocovariance(centered);
  if (!(acov[0] > 0.0)) throw DegenerateSampleError("ess: chain has zero variance");

  // tau = -1 + 2 sum_m P_m, P_m = rho_{2m} + rho_{2m+1}, summed while positive
  // and forced non-increasing.
  double tau = -1.0;
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double pair = (acov[2 * m] + acov[2 * m + 1]) / acov[0];
    if (!(pair > 0.0)) break;
    pair = std::min(pair, previous);
    tau += 2.0 * pair;
    previous = pair;
  }
  const auto nd = static_cast<double>(n);
  if (!(tau > 0.0)) return nd;
  return std::min(nd, nd / tau);
}

double bulk_ess(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) throw DegenerateSampleError("bulk_ess: no chains");
  const Eigen::Index n = chains.front().size();
  if (n < 10) throw DegenerateSampleError("bulk_ess: need at least 10 samples per chain");
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("bulk_ess: chains differ in length");
  }
  const Eigen::Index half = n / 2;
  const auto m = static_cast<Eigen::Index>(chains.size()) * 2;
  const Eigen::Index total = m * half;

  // Split chains, pooled in row-major (chain, draw) order.
  Eigen::MatrixXd split(m, half);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    split.row(2 * static_cast<Eigen::Index>(c)) = chains[c].head(half).transpose();
    split.row(2 * static_cast<Eigen::Index>(c) + 1) = chains[c].tail(half).transpose();
  }
  if ((split.array() == split(0, 0)).all()) return 1.0;

  // Average ranks of ties, then z = Phi^-1((r - 3/8) / (S + 1/4)).
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto value = [&](Eigen::Index k) { return split(k / half, k % half); };
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return value(a) < value(b); });
  Eigen::MatrixXd z(m, half);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && value(order[j + 1]) == value(order[i])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    const double p = (rank - 0.375) / (static_cast<double>(total) + 0.25);
    const double q = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    for (std::size_t k = i; k <= j; ++k) z(order[k] / half, order[k] % half) = q;
    i = j + 1;
  }

  std::vector<Eigen::VectorXd> acov;
  Eigen::VectorXd chain_mean(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    chain_mean[c] = z.row(c).mean();
    acov.push_back(autocovariance(z.row(c).transpose().array() - chain_mean[c]));
  }
  auto mean_acov = [&](Eigen::Index lag) {
    double s = 0.0;
    for (const auto& a : acov) s += a[lag];
    return s / static_cast<double>(m);
  };
  const double draws = static_cast<double>(half);
  const double mean_var = mean_acov(0) * draws / (draws - 1.0);
  const double between = (chain_mean.array() - chain_mean.mean()).square().sum() / static_cast<double>(m - 1);
  const double var_plus = mean_var * (draws - 1.0) / draws + between;
  if (!(var_plus > 0.0)) return 1.0;

  std::vector<double> rho(static_cast<std::size_t>(half), 0.0);
  double even = 1.0;
  double odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[0] = even;
  rho[1] = odd;
  Eigen::Index t = 1;
  while (t < half - 3 && even + odd > 0.0) {
    even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (even + odd >= 0.0) {
      rho[static_cast<std::size_t>(t + 1)] = even;
      rho[static_cast<std::size_t>(t + 2)] = odd;
    }
    t += 2;
  }
  const Eigen::Index max_t = t - 2;
  if (even > 0.0) rho[static_cast<std::size_t>(max_t + 1)] = even;
  for (t = 1; t <= max_t - 2; t += 2) {
    const auto u = static_cast<std::size_t>(t);
    if (rho[u + 1] + rho[u + 2] > rho[u - 1] + rho[u]) {
      rho[u + 1] = 0.5 * (rho[u - 1] + rho[u]);
      rho[u + 2] = rho[u + 1];
    }
  }
  double tau = -1.0;
  for (Eigen::Index k = 0; k <= max_t; ++k) tau += 2.0 * rho[static_cast<std::size_t>(k)];
  tau += rho[static_cast<std::size_t>(max_t + 1)];
  const double n_total = static_cast<double>(total);
  tau = std::max(tau, 1.0 / std::log10(n_total));
  return std::min(n_total / tau, static_cast<double>(chains.size()) * static_cast<double>(n));
}

double ece(const Eigen::Ref<const Eigen::MatrixXd>& probs, const std::vector<int>& labels, int bins) {
  const Eigen::Index n = probs.rows();
  if (n == 0 || probs.cols() == 0) throw std::invalid_argument("ece: empty input");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("ece: label count mismatch");
  if (bins < 1) throw std::invalid_argument("ece: bins must be positive");
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6) throw std::invalid_argument("ece: probability row does not sum to 1");
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= probs.cols()) throw std::invalid_argument("ece: label out of range");
    Eigen::Index pred = 0;
    const double conf = probs.row(i).maxCoeff(&pred);
    // Bins are (b/B, (b+1)/B].
    const int b = std::clamp(static_cast<int>(std::ceil(conf * bins)) - 1, 0, bins - 1);
    conf_sum[static_cast<std::size_t>(b)] += conf;
    hits[static_cast<std::size_t>(b)] += pred == y ? 1.0 : 0.0;
    count[static_cast<std::size_t>(b)] += 1.0;
  }
  double total = 0.0;
  for (std::size_t b = 0; b < count.size(); ++b) {
    if (count[b] == 0.0) continue;
    total += count[b] / static_cast<double>(n) * std::abs(hits[b] / count[b] - conf_sum[b] / count[b]);
  }
  return total;
}

double accuracy(const Eigen::Ref<const Eigen::MatrixXd>& probs, const std::vector<int>& labels) {
  if (probs.rows() == 0 || static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw std::invalid_argument("accuracy: shape mismatch");
  }
  double hits = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index pred = 0;
    probs.row(i).maxCoeff(&pred);
    hits += pred == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  return hits / static_cast<double>(probs.rows());
}

KsResult ks_test_normal(const Eigen::Ref<const Eigen::VectorXd>& samples, double mean, double sd) {
  const Eigen::Index n = samples.size();
  if (n < 1) throw std::invalid_argument("ks_test_normal: empty sample");
  std::vector<double> sorted(samples.data(), samples.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const auto nd = static_cast<double>(n);
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double cdf = normal_cdf((sorted[static_cast<std::size_t>(i)] - mean) / sd);
    d = std::max({d, static_cast<double>(i + 1) / nd - cdf, cdf - static_cast<double>(i) / nd});
  }
  const double root = std::sqrt(nd);
  return {d, kolmogorov_tail((root + 0.12 + 0.11 / root) * d)};
}

ChainSummary summarize(const std::vector<RunReport>& chains, const std::optional<MarginalInfo>& marginal) {
  if (chains.empty()) throw std::invalid_argument("summarize: no chains");
  const Eigen::Index dim = chains.front().dimension;
  ChainSummary s;
  double wall = 0.0;
  double log_density_sum = 0.0;
  for (const RunReport& r : chains) {
    if (r.dimension != dim) throw std::invalid_argument("summarize: chains disagree on dimension");
    s.samples += r.samples.rows();
    s.steps += r.steps;
    s.accepted += r.accepted;
    s.floored += r.floored;
    s.nonfinite_rejections += r.nonfinite_rejections;
    wall += r.wall_seconds;
    log_density_sum += r.sample_log_density.sum();
    if (r.error) s.errors.push_back("chain " + std::to_string(r.chain) + ": " + *r.error);
  }
  if (s.samples == 0) throw std::invalid_argument("summarize: no retained samples");
  if (s.steps > 0) {
    s.acceptance_rate = static_cast<double>(s.accepted) / static_cast<double>(s.steps);
    s.wall_seconds_per_step = wall / static_cast<double>(s.steps);
  }
  s.mean_log_density = log_density_sum / static_cast<double>(s.samples);

  Eigen::MatrixXd pooled(s.samples, dim);
  Eigen::Index row = 0;
  for (const RunReport& r : chains) {
    pooled.middleRows(row, r.samples.rows()) = r.samples;
    row += r.samples.rows();
  }
  s.mean = pooled.colwise().mean().transpose();
  if (s.samples >= 2) {
    s.variance = ((pooled.rowwise() - s.mean.transpose()).array().square().colwise().sum() /
                  static_cast<double>(s.samples - 1))
                     .transpose()
                     .matrix();
  }

  const Eigen::Index length = chains.front().samples.rows();
  const bool usable = length >= 10 && std::all_of(chains.begin(), chains.end(),
                                                  [&](const RunReport& r) { return r.samples.rows() == length; });
  if (usable) {
    Eigen::VectorXd per_param(dim);
    std::vector<Eigen::VectorXd> columns(chains.size());
    for (Eigen::Index j = 0; j < dim; ++j) {
      for (std::size_t c = 0; c < chains.size(); ++c) columns[c] = chains[c].samples.col(j);
      per_param[j] = bulk_ess(columns);
    }
    s.ess = per_param;
  }

  if (marginal && marginal->index < dim) {
    try {
      s.kl = gaussian_fit_kl(pooled.col(marginal->index), marginal->mean, marginal->variance);
    } catch (const DegenerateSampleError& e) {
      s.errors.push_back(std::string("kl: ") + e.what());
    }
    if (s.ess) {
      s.ess_marginal = (*s.ess)[marginal->index];
      if (dim > 1) s.ess_other_mean = (s.ess->sum() - (*s.ess)[marginal->index]) / static_cast<double>(dim - 1);
    }
  } else if (s.ess) {
    s.ess_other_mean = s.ess->mean();
  }
  return s;
}

}  // namespace fmala
