// SPDX-License-Identifier: Apache-2.0
//
// fmala-bench: run samplers on benchmark targets from JSON configs.
//
//   fmala-bench run <config> [--out DIR] [--seeds 0,1,2] [--threads N] [--dump-samples]
//   fmala-bench grid <config> [...same flags]
//   fmala-bench check
//   fmala-bench preset funnel10|funnel50|funnel100|gauss|logistic|bnn [--sampler NAME]

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fmala/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAllFailed = 2;
constexpr int kExitPartial = 3;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      if (item.front() == '-') throw std::invalid_argument("negative");
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw fmala::ConfigError("--seeds: '" + item + "' is not a non-negative integer", "seeds");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw fmala::ConfigError("--seeds: empty list", "seeds");
  return seeds;
}

struct CommonFlags {
  std::string config;
  std::string out;
  std::string seeds;
  int threads = 0;
  bool dump_samples = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("config", flags.config, "JSON experiment config")->required();
  cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seeds", flags.seeds, "Comma-separated seed list (overrides seeds)");
  cmd->add_option("--threads", flags.threads, "Worker threads (RUN_THREADS overrides)");
  cmd->add_flag("--dump-samples", flags.dump_samples, "Write per-chain sample CSVs");
}

int execute(const CommonFlags& flags, bool want_grid) {
  fmala::ExperimentConfig cfg;
  try {
    cfg = fmala::parse_config(flags.config);
    if (!flags.seeds.empty()) cfg.seeds = parse_seed_list(flags.seeds);
    if (!flags.out.empty()) cfg.output_dir = flags.out;
    if (flags.dump_samples) cfg.dump_samples = true;
    if (cfg.output_dir.empty()) cfg.output_dir = "results";
    if (want_grid && !cfg.grid) throw fmala::ConfigError("grid: field 'eta' must be a grid object", "eta");
    if (!want_grid && !cfg.eta) throw fmala::ConfigError("run: field 'eta' must be a number; use 'grid' for grids", "eta");
    cfg.validate();
  } catch (const fmala::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  fmala::RunOptions options;
  options.threads = fmala::resolve_threads(flags.threads);
  fmala::GridResult result;
  try {
    result = fmala::run_experiment(cfg, options);
    fmala::emit_report(result, cfg.output_dir);
  } catch (const fmala::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAllFailed;
  }

  for (const auto& cell : result.cells) {
    for (const auto& err : cell.errors) {
      std::cerr << "eta=" << fmala::format_number(cell.eta) << " seed=" << cell.seed << ": " << err << "\n";
    }
  }
  std::cout << "wrote " << cfg.output_dir << "/summary.json (" << result.cells.size() << " runs, "
            << result.failed_runs() << " failed)\n";
  if (result.best_eta_index) {
    const auto& best = result.per_eta[*result.best_eta_index];
    std::cout << "best eta " << fmala::format_number(best.eta) << " (" << result.criterion << " = "
              << fmala::format_number(result.criterion == "min_mean_kl" ? best.mean_kl : best.mean_log_density)
              << ")\n";
  }
  const int failed = result.failed_runs();
  if (failed == static_cast<int>(result.cells.size())) return kExitAllFailed;
  if (failed > 0) return kExitPartial;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward-mode Langevin samplers benchmark"};
  app.require_subcommand(1);

  CommonFlags run_flags, grid_flags;
  add_common(app.add_subcommand("run", "Run one step size from a config"), run_flags);
  add_common(app.add_subcommand("grid", "Grid search over step sizes"), grid_flags);
  auto* check = app.add_subcommand("check", "Finite-difference and moment self-tests");
  auto* preset = app.add_subcommand("preset", "Print a protocol config as JSON");
  std::string preset_name;
  std::string sampler = "pc-line-fmala";
  preset->add_option("name", preset_name, "funnel10|funnel50|funnel100|gauss|logistic|bnn")->required();
  preset->add_option("--sampler", sampler, "mala|fmala|line-fmala|pc-fmala|pc-line-fmala");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (app.got_subcommand("run")) return execute(run_flags, false);
  if (app.got_subcommand("grid")) return execute(grid_flags, true);
  if (check->parsed()) return fmala::self_check(std::cout) ? 0 : kExitAllFailed;
  if (preset->parsed()) {
    try {
      std::cout << fmala::preset(preset_name, fmala::parse_algorithm(sampler)).dump(2) << "\n";
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
  }
  return 0;
}
