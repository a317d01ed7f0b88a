// SPDX-License-Identifier: Apache-2.0
#include "fmala/samplers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fmala/tangent.hpp"
#include "fmala/targets.hpp"

namespace fmala {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal_iso(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, double var) {
  const auto d = static_cast<double>(x.size());
  return -0.5 * d * (kLog2Pi + std::log(var)) - (x - mean).squaredNorm() / (2.0 * var);
}

double log_normal_scalar(double residual, double var) {
  return -0.5 * (kLog2Pi + std::log(var)) - residual * residual / (2.0 * var);
}

void check_state(const ChainState& state, const TargetModel& target) {
  if (state.theta.size() != target.dimension()) {
    throw std::invalid_argument("sampler step: state dimension does not match target");
  }
}

// Shared body of the four forward-mode kernels.
StepOutcome forward_mode_step(Algorithm algorithm, ChainState& state, const TargetModel& target,
                              const SamplerConfig& cfg) {
  check_state(state, target);
  const bool line = is_line_kernel(algorithm);
  const bool second = is_preconditioned(algorithm);
  const Eigen::Index dim = target.dimension();

  StepOutcome out;
  TangentVector v = sample_unit_sphere(state.streams.tangent, dim);

  auto evaluate = [&](const Eigen::VectorXd& x, const TangentVector& tangent, Endpoint& info) -> double {
    info.tangent = tangent.components;
    if (second) {
      const SecondOrder r = eval_f2(target, x, tangent);
      info.jvp = r.jvp;
      info.vhv = r.vhv;
      const auto [h, clamped] = floored_curvature(r.vhv, cfg.precond_floor);
      info.curvature = h;
      out.floored = out.floored || clamped;
      return r.value;
    }
    const FirstOrder r = eval_f1(target, x, tangent);
    info.jvp = r.jvp;
    return r.value;
  };

  evaluate(state.theta, v, out.current);
  const StepScales fwd = step_scales(algorithm, cfg.step_size, dim, out.current.curvature, cfg.correction);
  const double drift = fwd.drift * out.current.jvp;
  if (line) {
    const double z = state.streams.noise.normal();
    out.proposal = state.theta + (drift + fwd.noise_std * z) * v.components;
  } else {
    const Eigen::VectorXd z = state.streams.noise.normal_vector(dim);
    out.proposal = state.theta + drift * v.components + fwd.noise_std * z;
  }

  const TangentVector v_rev = line ? v : sample_unit_sphere(state.streams.tangent, dim);
  try {
    out.proposal_log_density = evaluate(out.proposal, v_rev, out.at_proposal);
  } catch (const EvaluationError&) {
    out.proposal_nonfinite = true;
  } catch (const DomainError&) {
    out.proposal_nonfinite = true;
  }

  if (out.proposal_nonfinite) {
    out.proposal_log_density = kNegInf;
    out.log_accept = kNegInf;
  } else {
    out.log_q_forward = log_proposal_density(algorithm, out.proposal, state.theta, out.current, cfg);
    out.log_q_reverse = log_proposal_density(algorithm, state.theta, out.proposal, out.at_proposal, cfg);
    const double gamma =
        out.proposal_log_density + out.log_q_reverse - state.log_density - out.log_q_forward;
    out.log_accept = std::isnan(gamma) ? kNegInf : std::min(0.0, gamma);
  }
  out.accepted = mh_accept(out.log_accept, state.streams.accept);
  return out;
}

}  // namespace

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kMala: return "mala";
    case Algorithm::kFmala: return "fmala";
    case Algorithm::kLineFmala: return "line-fmala";
    case Algorithm::kPcFmala: return "pc-fmala";
    case Algorithm::kPcLineFmala: return "pc-line-fmala";
  }
  throw std::invalid_argument("unknown algorithm");
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : kAllAlgorithms) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown sampler '" + name +
                              "' (expected mala, fmala, line-fmala, pc-fmala or pc-line-fmala)");
}

bool is_line_kernel(Algorithm algorithm) {
  return algorithm == Algorithm::kLineFmala || algorithm == Algorithm::kPcLineFmala;
}

bool is_preconditioned(Algorithm algorithm) {
  return algorithm == Algorithm::kPcFmala || algorithm == Algorithm::kPcLineFmala;
}

void SamplerConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("step_size must be positive and finite");
  }
  if (!(precond_floor > 0.0)) throw std::invalid_argument("precond_floor must be positive");
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
  if (burn_in < 0 || (max_iterations > 0 && burn_in >= max_iterations)) {
    throw std::invalid_argument("burn_in must be non-negative and below max_iterations");
  }
  if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
  if (!(init_std >= 0.0)) throw std::invalid_argument("init_std must be non-negative");
}

StepScales step_scales(Algorithm algorithm, double step_size, Eigen::Index dim, double curvature,
                       BiasCorrection correction) {
  const double d = correction == BiasCorrection::kPaperDefault ? static_cast<double>(dim) : 1.0;
  const double eta2 = step_size * step_size;
  switch (algorithm) {
    case Algorithm::kMala: return {0.5 * eta2, step_size};
    case Algorithm::kFmala: return {0.5 * d * eta2, step_size};
    case Algorithm::kLineFmala: return {0.5 * d * eta2, std::sqrt(d) * step_size};
    case Algorithm::kPcFmala: return {eta2 / (2.0 * curvature), step_size / std::sqrt(d * curvature)};
    case Algorithm::kPcLineFmala: return {eta2 / (2.0 * curvature), step_size / std::sqrt(curvature)};
  }
  throw std::invalid_argument("step_scales: unknown algorithm");
}

std::pair<double, bool> floored_curvature(double vhv, double floor) {
  const double h = std::abs(vhv);
  if (h < floor) return {floor, true};
  return {h, false};
}

Eigen::VectorXd proposal_mean(Algorithm algorithm, const Eigen::VectorXd& from, const Endpoint& info,
                              const SamplerConfig& cfg) {
  const StepScales s = step_scales(algorithm, cfg.step_size, from.size(), info.curvature, cfg.correction);
  if (algorithm == Algorithm::kMala) return from + s.drift * info.gradient;
  return from + (s.drift * info.jvp) * info.tangent;
}

double log_proposal_density(Algorithm algorithm, const Eigen::VectorXd& to, const Eigen::VectorXd& from,
                            const Endpoint& from_info, const SamplerConfig& cfg) {
  const StepScales s = step_scales(algorithm, cfg.step_size, from.size(), from_info.curvature, cfg.correction);
  const double var = s.noise_std * s.noise_std;
  if (is_line_kernel(algorithm)) {
    const double offset = (to - from).dot(from_info.tangent);
    return log_normal_scalar(offset - s.drift * from_info.jvp, var);
  }
  return log_normal_iso(to, proposal_mean(algorithm, from, from_info, cfg), var);
}

bool mh_accept(double gamma, RngStream& rng) {
  const double u = rng.uniform();
  return std::log(u) < gamma;
}

StepOutcome mala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg) {
  check_state(state, target);
  const Eigen::Index dim = target.dimension();
  StepOutcome out;
  out.current.gradient = value_and_gradient(target, state.theta).gradient;
  const StepScales s = step_scales(Algorithm::kMala, cfg.step_size, dim, 1.0, cfg.correction);
  out.proposal = state.theta + s.drift * out.current.gradient + s.noise_std * state.streams.noise.normal_vector(dim);
  try {
    ValueAndGradient at = value_and_gradient(target, out.proposal);
    out.proposal_log_density = at.value;
    out.at_proposal.gradient = std::move(at.gradient);
  } catch (const EvaluationError&) {
    out.proposal_nonfinite = true;
  } catch (const DomainError&) {
    out.proposal_nonfinite = true;
  }
  if (out.proposal_nonfinite) {
    out.proposal_log_density = kNegInf;
    out.log_accept = kNegInf;
  } else {
    out.log_q_forward = log_proposal_density(Algorithm::kMala, out.proposal, state.theta, out.current, cfg);
    out.log_q_reverse = log_proposal_density(Algorithm::kMala, state.theta, out.proposal, out.at_proposal, cfg);
    const double gamma = out.proposal_log_density + out.log_q_reverse - state.log_density - out.log_q_forward;
    out.log_accept = std::isnan(gamma) ? kNegInf : std::min(0.0, gamma);
  }
  out.accepted = mh_accept(out.log_accept, state.streams.accept);
  return out;
}

StepOutcome fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg) {
  return forward_mode_step(Algorithm::kFmala, state, target, cfg);
}
StepOutcome line_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg) {
  return forward_mode_step(Algorithm::kLineFmala, state, target, cfg);
}
StepOutcome pc_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg) {
  return forward_mode_step(Algorithm::kPcFmala, state, target, cfg);
}
StepOutcome pc_line_fmala_step(ChainState& state, const TargetModel& target, const SamplerConfig& cfg) {
  return forward_mode_step(Algorithm::kPcLineFmala, state, target, cfg);
}

Kernel kernel_for(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kMala: return mala_step;
    case Algorithm::kFmala: return fmala_step;
    case Algorithm::kLineFmala: return line_fmala_step;
    case Algorithm::kPcFmala: return pc_fmala_step;
    case Algorithm::kPcLineFmala: return pc_line_fmala_step;
  }
  throw std::invalid_argument("kernel_for: unknown algorithm");
}

ChainState initial_state(const TargetModel& target, const SamplerConfig& cfg, std::uint64_t seed,
                         std::uint64_t chain) {
  ChainState state{Eigen::VectorXd(), 0.0, 0, ChainStreams(seed, chain)};
  state.theta = cfg.init_std * state.streams.init.normal_vector(target.dimension());
  state.log_density = target.log_density(state.theta);
  if (!std::isfinite(state.log_density)) {
    throw EvaluationError("non-finite log-density at the initial state of '" + target.name() + "'");
  }
  return state;
}

RunReport run_chain(const Kernel& kernel, const TargetModel& target, const SamplerConfig& cfg,
                    std::uint64_t seed, std::uint64_t chain) {
  cfg.validate();
  RunReport report;
  report.config = cfg;
  report.seed = seed;
  report.chain = chain;
  report.dimension = target.dimension();

  const long expected = cfg.max_iterations > cfg.burn_in ? (cfg.max_iterations - cfg.burn_in) / cfg.thinning : 0;
  report.samples.resize(expected, target.dimension());
  report.sample_log_density.resize(expected);
  report.sample_iteration.reserve(static_cast<std::size_t>(expected));
  report.sample_accepted.reserve(static_cast<std::size_t>(expected));
  report.trace.reserve(static_cast<std::size_t>(cfg.max_iterations));

  const auto start = std::chrono::steady_clock::now();
  Eigen::Index kept = 0;
  try {
    ChainState state = initial_state(target, cfg, seed, chain);
    for (long t = 1; t <= cfg.max_iterations; ++t) {
      StepOutcome step;
      try {
        step = kernel(state, target, cfg);
      } catch (const std::exception& e) {
        report.error = "iteration " + std::to_string(t) + ": " + e.what();
        break;
      }
      if (step.accepted) {
        state.theta = std::move(step.proposal);
        state.log_density = step.proposal_log_density;
      }
      state.iteration = t;
      ++report.steps;
      report.accepted += step.accepted ? 1 : 0;
      report.floored += step.floored ? 1 : 0;
      report.nonfinite_rejections += step.proposal_nonfinite ? 1 : 0;
      report.trace.push_back({step.log_accept, step.accepted, step.floored});
      if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thinning == 0 && kept < expected) {
        report.samples.row(kept) = state.theta.transpose();
        report.sample_log_density[kept] = state.log_density;
        report.sample_iteration.push_back(t);
        report.sample_accepted.push_back(step.accepted ? 1 : 0);
        ++kept;
      }
    }
  } catch (const std::exception& e) {
    report.error = std::string("initialization: ") + e.what();
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (kept < expected) {
    report.samples.conservativeResize(kept, target.dimension());
    report.sample_log_density.conservativeResize(kept);
  }
  return report;
}

RunReport run_chain(const TargetModel& target, const SamplerConfig& cfg, std::uint64_t seed,
                    std::uint64_t chain) {
  return run_chain(kernel_for(cfg.algorithm), target, cfg, seed, chain);
}

}  // namespace fmala
