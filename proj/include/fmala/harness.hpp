// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: JSON configs, step-size grids over many seeds and
// chains, and the on-disk report (summary.json, grid.csv, best.json, per-run
// summaries and optional sample dumps).

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmala/dataset.hpp"
#include "fmala/diagnostics.hpp"
#include "fmala/samplers.hpp"
#include "fmala/targets.hpp"

namespace fmala {

inline constexpr int kSchemaVersion = 1;

/// Malformed or invalid configuration. `field` names the offending key when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TargetSpec {
  std::string kind = "funnel";  // funnel | gaussian | rosenbrock | logistic | bnn
  Eigen::Index dim = 10;        // funnel latent dimension or gaussian dimension
  double sigma = 1.0;
  double a = 1.0, b = 100.0, scale = 0.05;
  // data-backed targets
  std::string csv;
  std::uint64_t data_seed = 0;
  Eigen::Index n = 0;  // 0 selects the per-kind default
  Eigen::Index input_dim = 20;
  int classes = 3;
  double separation = 1.5;
  double noise = 0.025;
  std::vector<Eigen::Index> layers{1, 16, 16, 1};
  Activation activation = Activation::kTanh;
  double sigma_prior = 0.1;
  double sigma_lik = 0.025;

  std::string label() const;
};

struct EtaGrid {
  int count = 1;
  double min = 0.1;
  double max = 2.0;
  bool log = true;

  /// Ascending grid; log spacing gives exp(log min + i/(count-1) (log max - log min)).
  std::vector<double> values() const;
};

struct ExperimentConfig {
  TargetSpec target;
  Algorithm sampler = Algorithm::kPcLineFmala;
  std::optional<double> eta;
  std::optional<EtaGrid> grid;
  long chains = 5;
  long samples = 10000;
  long burn_in = 0;
  long thinning = 1;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir;
  bool dump_samples = false;
  double precond_floor = 1e-8;
  BiasCorrection correction = BiasCorrection::kPaperDefault;
  double init_std = 0.1;

  std::vector<double> etas() const;
  SamplerConfig sampler_config(double step_size) const;
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads and validates a JSON config; parse errors report the line.
ExperimentConfig parse_config(const std::string& path);

/// Paper-protocol configs: funnel10, funnel50, funnel100, gauss, logistic, bnn.
nlohmann::json preset(const std::string& name, Algorithm sampler = Algorithm::kPcLineFmala);

/// Target plus the data it was built from (null for analytic targets).
struct BuiltTarget {
  TargetModel model;
  std::shared_ptr<const LabeledDataset> data;
};
BuiltTarget build_target(const TargetSpec& spec);

struct GridCell {
  std::size_t eta_index = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::optional<ChainSummary> summary;
  std::vector<std::string> errors;

  bool failed() const { return !summary || !errors.empty(); }
};

struct EtaAggregate {
  double eta = 0.0;
  int ok_runs = 0;
  std::optional<double> mean_kl, sd_kl;
  std::optional<double> mean_accept, sd_accept;
  std::optional<double> mean_ess_marginal, sd_ess_marginal;
  std::optional<double> mean_ess_other, sd_ess_other;
  std::optional<double> mean_log_density;
};

struct GridResult {
  ExperimentConfig config;
  std::vector<double> etas;
  std::vector<GridCell> cells;  // eta-major, then seed order
  std::vector<EtaAggregate> per_eta;
  std::string criterion;  // "min_mean_kl" or "max_mean_log_density"
  std::optional<std::size_t> best_eta_index;
  /// Retained state of every chain when RunOptions::keep_samples is set:
  /// samples[cell][chain].
  std::vector<std::vector<Eigen::MatrixXd>> samples;

  int failed_runs() const;
};

struct RunOptions {
  int threads = 0;  // 0: hardware concurrency
  bool keep_samples = false;
};

/// Worker count from --threads, overridden by RUN_THREADS when set.
int resolve_threads(int flag_value);

/// Runs every (eta, seed, chain) triple on a bounded pool, summarizes each
/// (eta, seed) cell when its last chain joins, writes per-run files when an
/// output directory is configured, then aggregates and selects the best eta.
GridResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Smallest-eta-wins selection over per-eta aggregates.
std::optional<std::size_t> select_best(const std::vector<EtaAggregate>& per_eta, bool use_kl);

nlohmann::json summary_to_json(const ChainSummary& s);

/// Writes summary.json, grid.csv and best.json into `out_dir`.
void emit_report(const GridResult& result, const std::string& out_dir);

/// "%.17g", empty for missing values.
std::string format_number(std::optional<double> x);

/// Finite-difference and moment self-tests behind the `check` subcommand.
/// Returns true when every check passes; writes one line per check.
bool self_check(std::ostream& log);

}  // namespace fmala
