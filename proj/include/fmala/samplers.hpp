// SPDX-License-Identifier: Apache-2.0
//
// Metropolis-adjusted Langevin kernels driven by forward-mode evaluations.
//
// All five kernels share one proposal shape. From an endpoint x with scalars
// (jvp, h) along tangent v the proposal is Gaussian with
//
//   full-space kernels:  mean x + drift * jvp * v   (MALA: x + drift * grad)
//                        covariance noise^2 I
//   line kernels:        scalar offset along v with mean drift * jvp
//                        variance noise^2
//
// where (drift, noise) come from step_scales(). With the default bias
// correction and D the parameter dimension:
//
//   kernel          drift              noise
//   mala            eta^2 / 2          eta
//   fmala           D eta^2 / 2        eta
//   line-fmala      D eta^2 / 2        sqrt(D) eta
//   pc-fmala        eta^2 / (2 h)      eta / sqrt(D h)
//   pc-line-fmala   eta^2 / (2 h)      eta / sqrt(h)
//
// with h = max(|v^T H v|, floor). BiasCorrection::kUncorrected drops every
// sqrt(D) factor. Tangent densities are uniform on the sphere and cancel.

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fmala/forward_mode.hpp"
#include "fmala/rng.hpp"
#include "fmala/target_model.hpp"

namespace fmala {

enum class Algorithm { kMala, kFmala, kLineFmala, kPcFmala, kPcLineFmala };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::kMala, Algorithm::kFmala, Algorithm::kLineFmala,
                                               Algorithm::kPcFmala, Algorithm::kPcLineFmala};

/// "mala", "fmala", "line-fmala", "pc-fmala", "pc-line-fmala".
std::string to_string(Algorithm algorithm);
/// Inverse of to_string; throws std::invalid_argument on unknown names.
Algorithm parse_algorithm(const std::string& name);

bool is_line_kernel(Algorithm algorithm);
bool is_preconditioned(Algorithm algorithm);

enum class BiasCorrection { kPaperDefault, kUncorrected };

struct SamplerConfig {
  Algorithm algorithm = Algorithm::kPcLineFmala;
  double step_size = 0.1;
  double precond_floor = 1e-8;
  BiasCorrection correction = BiasCorrection::kPaperDefault;
  long max_iterations = 10000;
  long burn_in = 0;
  long thinning = 1;
  double init_std = 0.1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ChainState {
  Eigen::VectorXd theta;
  double log_density = 0.0;
  long iteration = 0;
  ChainStreams streams;
};

/// What the proposal density needs to know about the endpoint it starts from.
struct Endpoint {
  double jvp = std::numeric_limits<double>::quiet_NaN();
  double vhv = std::numeric_limits<double>::quiet_NaN();
  double curvature = 1.0;  // floored |vhv|; 1 for first-order kernels
  Eigen::VectorXd tangent;   // forward-mode kernels
  Eigen::VectorXd gradient;  // MALA
};

struct StepOutcome {
  Eigen::VectorXd proposal;
  double proposal_log_density = -std::numeric_limits<double>::infinity();
  double log_accept = -std::numeric_limits<double>::infinity();  // gamma, always <= 0
  bool accepted = false;
  Endpoint current;
  Endpoint at_proposal;
  double log_q_forward = 0.0;  // log q(proposal | current)
  double log_q_reverse = 0.0;  // log q(current | proposal)
  bool floored = false;
  bool proposal_nonfinite = false;  // proposal evaluated to a non-finite density; rejected
};

struct StepScales {
  double drift = 0.0;
  double noise_std = 0.0;
};

StepScales step_scales(Algorithm algorithm, double step_size, Eigen::Index dim, double curvature,
                       BiasCorrection correction);

/// max(|vhv|, floor) and whether the floor engaged.
std::pair<double, bool> floored_curvature(double vhv, double floor);

/// Mean of the proposal started at `from` (full-space kernels), or the point
/// from + drift * jvp * v (line kernels, which is the same expression).
Eigen::VectorXd proposal_mean(Algorithm algorithm, const Eigen::VectorXd& from, const Endpoint& info,
                              const SamplerConfig& cfg);

/// log q(to | from) for the given kernel; line kernels evaluate the scalar
/// density of (to - from) . v.
double log_proposal_density(Algorithm algorithm, const Eigen::VectorXd& to, const Eigen::VectorXd& from,
                            const Endpoint& from_info, const SamplerConfig& cfg);

/// u ~ U(0,1) from `rng`; accepted iff log u < gamma.
bool mh_accept(double gamma, RngStream& rng);

StepOutcome mala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg);
StepOutcome fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg);
StepOutcome line_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg);
StepOutcome pc_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg);
StepOutcome pc_line_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg);

/// A transition: consumes randomness from state.streams, leaves theta alone.
using Kernel = std::function<StepOutcome(ChainState&, const TargetModel&, const SamplerConfig&)>;

Kernel kernel_for(Algorithm algorithm);

struct StepTrace {
  double log_accept = 0.0;
  bool accepted = false;
  bool floored = false;
};

struct RunReport {
  SamplerConfig config;
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  Eigen::Index dimension = 0;
  Eigen::MatrixXd samples;  // retained states, one per row
  std::vector<long> sample_iteration;
  std::vector<char> sample_accepted;  // whether the step that produced the row accepted
  Eigen::VectorXd sample_log_density;
  std::vector<StepTrace> trace;
  long steps = 0;
  long accepted = 0;
  long floored = 0;
  long nonfinite_rejections = 0;
  double wall_seconds = 0.0;
  std::optional<std::string> error;  // set when a kernel error aborted the chain

  std::optional<double> acceptance_rate() const {
    if (steps == 0) return std::nullopt;
    return static_cast<double>(accepted) / static_cast<double>(steps);
  }
};

/// Fresh chain state: theta_0 ~ N(0, init_std^2 I) drawn from the init stream.
ChainState initial_state(const TargetModel& target, const SamplerConfig& cfg, std::uint64_t seed,
                         std::uint64_t chain);

/// Runs cfg.max_iterations transitions, keeps every cfg.thinning-th state after
/// cfg.burn_in. Deterministic in (seed, chain).
RunReport run_chain(const Kernel& kernel, const TargetModel& target, const SamplerConfig& cfg,
                    std::uint64_t seed, std::uint64_t chain);
RunReport run_chain(const TargetModel& target, const SamplerConfig& cfg, std::uint64_t seed,
                    std::uint64_t chain);

}  // namespace fmala
