// SPDX-License-Identifier: Apache-2.0
#include "fmala/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "fmala/forward_mode.hpp"
#include "fmala/tangent.hpp"

namespace fmala {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kTopLevelKeys = {
    "target", "sampler", "eta", "chains", "samples", "burn_in", "thinning", "seeds",
    "output_dir", "dump_samples", "precond_floor", "bias_correction", "init_std"};

const std::set<std::string> kTargetKeys = {
    "name", "dim", "sigma", "a", "b", "scale", "csv", "data_seed", "n", "input_dim", "classes",
    "separation", "noise", "layers", "activation", "sigma_prior", "sigma_lik"};

const std::set<std::string> kGridKeys = {"count", "min", "max", "log"};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      const std::string field = where.empty() ? key : where + "." + key;
      throw ConfigError("unknown key '" + field + "'", field);
    }
  }
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& field, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + field + "' has the wrong type: " + e.what(), field);
  }
}

TargetSpec apply_shorthand(const std::string& name) {
  TargetSpec spec;
  static const std::regex funnel_re("funnel([0-9]+)");
  std::smatch m;
  if (std::regex_match(name, m, funnel_re)) {
    spec.kind = "funnel";
    spec.dim = std::stol(m[1]);
  } else if (name == "funnel") {
    spec.kind = "funnel";
  } else if (name == "gauss" || name == "gaussian") {
    spec.kind = "gaussian";
    spec.dim = 1;
  } else if (name == "rosenbrock" || name == "logistic" || name == "bnn") {
    spec.kind = name;
  } else {
    throw ConfigError("unknown target '" + name + "'", "target");
  }
  return spec;
}

TargetSpec target_from_json(const json& j) {
  if (j.is_string()) return apply_shorthand(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("field 'target' must be a string or an object", "target");
  reject_unknown(j, kTargetKeys, "target");
  if (!j.contains("name")) throw ConfigError("field 'target.name' is required", "target.name");
  TargetSpec spec = apply_shorthand(get_field<std::string>(j, "name", "target.name", ""));
  spec.dim = get_field<long>(j, "dim", "target.dim", spec.dim);
  spec.sigma = get_field<double>(j, "sigma", "target.sigma", spec.sigma);
  spec.a = get_field<double>(j, "a", "target.a", spec.a);
  spec.b = get_field<double>(j, "b", "target.b", spec.b);
  spec.scale = get_field<double>(j, "scale", "target.scale", spec.scale);
  spec.csv = get_field<std::string>(j, "csv", "target.csv", spec.csv);
  spec.data_seed = get_field<std::uint64_t>(j, "data_seed", "target.data_seed", spec.data_seed);
  spec.n = get_field<long>(j, "n", "target.n", spec.n);
  spec.input_dim = get_field<long>(j, "input_dim", "target.input_dim", spec.input_dim);
  spec.classes = get_field<int>(j, "classes", "target.classes", spec.classes);
  spec.separation = get_field<double>(j, "separation", "target.separation", spec.separation);
  spec.noise = get_field<double>(j, "noise", "target.noise", spec.noise);
  if (j.contains("layers")) {
    spec.layers = get_field<std::vector<Eigen::Index>>(j, "layers", "target.layers", {});
  }
  const std::string act = get_field<std::string>(j, "activation", "target.activation", "tanh");
  if (act == "tanh") {
    spec.activation = Activation::kTanh;
  } else if (act == "relu") {
    spec.activation = Activation::kRelu;
  } else {
    throw ConfigError("field 'target.activation' must be 'tanh' or 'relu'", "target.activation");
  }
  spec.sigma_prior = get_field<double>(j, "sigma_prior", "target.sigma_prior", spec.sigma_prior);
  spec.sigma_lik = get_field<double>(j, "sigma_lik", "target.sigma_lik", spec.sigma_lik);
  return spec;
}

json target_to_json(const TargetSpec& t) {
  json j = {{"name", t.kind}};
  if (t.kind == "funnel" || t.kind == "gaussian") j["dim"] = t.dim;
  if (t.kind == "gaussian") j["sigma"] = t.sigma;
  if (t.kind == "rosenbrock") {
    j["a"] = t.a;
    j["b"] = t.b;
    j["scale"] = t.scale;
  }
  if (t.kind == "logistic" || t.kind == "bnn") {
    if (!t.csv.empty()) j["csv"] = t.csv;
    j["data_seed"] = t.data_seed;
    j["n"] = t.n;
  }
  if (t.kind == "logistic") {
    j["input_dim"] = t.input_dim;
    j["classes"] = t.classes;
    j["separation"] = t.separation;
  }
  if (t.kind == "bnn") {
    j["noise"] = t.noise;
    j["layers"] = t.layers;
    j["activation"] = t.activation == Activation::kTanh ? "tanh" : "relu";
    j["sigma_prior"] = t.sigma_prior;
    j["sigma_lik"] = t.sigma_lik;
  }
  return j;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

std::optional<Moments> moments(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string run_stem(std::size_t eta_index, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "eta%03zu_seed%llu", eta_index, static_cast<unsigned long long>(seed));
  return buf;
}

std::string samples_csv(const RunReport& r) {
  std::ostringstream os;
  os << "iteration,accepted";
  for (Eigen::Index j = 0; j < r.dimension; ++j) os << ",theta_" << j;
  os << "\n";
  for (Eigen::Index i = 0; i < r.samples.rows(); ++i) {
    os << r.sample_iteration[static_cast<std::size_t>(i)] << "," << int(r.sample_accepted[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < r.dimension; ++j) os << "," << format_number(r.samples(i, j));
    os << "\n";
  }
  return os.str();
}

json cell_json(const GridResult& result, const GridCell& cell) {
  json j = {{"schema_version", kSchemaVersion},
            {"sampler", to_string(result.config.sampler)},
            {"target", result.config.target.label()},
            {"eta_index", cell.eta_index},
            {"eta", cell.eta},
            {"seed", cell.seed},
            {"errors", cell.errors}};
  j["summary"] = cell.summary ? summary_to_json(*cell.summary) : json(nullptr);
  j["metadata"] = {{"wall_seconds_per_step", cell.summary ? json(cell.summary->wall_seconds_per_step) : json(nullptr)}};
  return j;
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string TargetSpec::label() const {
  if (kind == "funnel") return "funnel" + std::to_string(dim);
  if (kind == "gaussian") return "gaussian" + std::to_string(dim);
  return kind;
}

std::vector<double> EtaGrid::values() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    if (count == 1) {
      out.push_back(min);
      break;
    }
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(log ? std::exp(std::log(min) + t * (std::log(max) - std::log(min))) : min + t * (max - min));
  }
  return out;
}

std::vector<double> ExperimentConfig::etas() const {
  if (grid) return grid->values();
  if (eta) return {*eta};
  return {};
}

SamplerConfig ExperimentConfig::sampler_config(double step_size) const {
  SamplerConfig sc;
  sc.algorithm = sampler;
  sc.step_size = step_size;
  sc.precond_floor = precond_floor;
  sc.correction = correction;
  sc.burn_in = burn_in;
  sc.thinning = thinning;
  sc.max_iterations = burn_in + samples * thinning;
  sc.init_std = init_std;
  return sc;
}

void ExperimentConfig::validate() const {
  if (!eta && !grid) throw ConfigError("field 'eta' is required", "eta");
  if (eta && !(*eta > 0.0 && std::isfinite(*eta))) throw ConfigError("field 'eta' must be positive", "eta");
  if (grid) {
    if (grid->count < 1) throw ConfigError("field 'eta.count' must be at least 1", "eta.count");
    if (!(grid->min > 0.0)) throw ConfigError("field 'eta.min' must be positive", "eta.min");
    if (grid->count > 1 && !(grid->min < grid->max)) {
      throw ConfigError("field 'eta.min' must be below 'eta.max'", "eta.min");
    }
  }
  if (chains < 1) throw ConfigError("field 'chains' must be at least 1", "chains");
  if (samples < 1) throw ConfigError("field 'samples' must be at least 1", "samples");
  if (burn_in < 0) throw ConfigError("field 'burn_in' must be non-negative", "burn_in");
  if (thinning < 1) throw ConfigError("field 'thinning' must be at least 1", "thinning");
  if (seeds.empty()) throw ConfigError("field 'seeds' must not be empty", "seeds");
  if (!(precond_floor > 0.0)) throw ConfigError("field 'precond_floor' must be positive", "precond_floor");
  if (!(init_std >= 0.0)) throw ConfigError("field 'init_std' must be non-negative", "init_std");
  const TargetSpec& t = target;
  if ((t.kind == "funnel" || t.kind == "gaussian") && t.dim < 1) {
    throw ConfigError("field 'target.dim' must be positive", "target.dim");
  }
  if (t.kind == "gaussian" && !(t.sigma > 0.0)) throw ConfigError("field 'target.sigma' must be positive", "target.sigma");
  if (t.kind == "rosenbrock" && !(t.scale > 0.0)) throw ConfigError("field 'target.scale' must be positive", "target.scale");
  if (t.kind == "bnn" && (!(t.sigma_prior > 0.0) || !(t.sigma_lik > 0.0))) {
    throw ConfigError("fields 'target.sigma_prior' and 'target.sigma_lik' must be positive", "target.sigma_prior");
  }
  if (t.n < 0) throw ConfigError("field 'target.n' must be non-negative", "target.n");
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, kTopLevelKeys, "");
  ExperimentConfig cfg;
  if (!j.contains("target")) throw ConfigError("field 'target' is required", "target");
  cfg.target = target_from_json(j.at("target"));
  if (!j.contains("sampler")) throw ConfigError("field 'sampler' is required", "sampler");
  try {
    cfg.sampler = parse_algorithm(get_field<std::string>(j, "sampler", "sampler", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), "sampler");
  }
  if (!j.contains("eta")) throw ConfigError("field 'eta' is required", "eta");
  const json& eta = j.at("eta");
  if (eta.is_number()) {
    cfg.eta = eta.get<double>();
  } else if (eta.is_object()) {
    reject_unknown(eta, kGridKeys, "eta");
    EtaGrid g;
    g.count = get_field<int>(eta, "count", "eta.count", 0);
    g.min = get_field<double>(eta, "min", "eta.min", 0.0);
    g.max = get_field<double>(eta, "max", "eta.max", 0.0);
    g.log = get_field<bool>(eta, "log", "eta.log", true);
    cfg.grid = g;
  } else {
    throw ConfigError("field 'eta' must be a number or a grid object", "eta");
  }
  cfg.chains = get_field<long>(j, "chains", "chains", cfg.chains);
  cfg.samples = get_field<long>(j, "samples", "samples", cfg.samples);
  cfg.burn_in = get_field<long>(j, "burn_in", "burn_in", cfg.burn_in);
  cfg.thinning = get_field<long>(j, "thinning", "thinning", cfg.thinning);
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_array()) throw ConfigError("field 'seeds' must be an array of non-negative integers", "seeds");
    cfg.seeds.clear();
    for (const json& x : s) {
      const bool ok = x.is_number_unsigned() || (x.is_number_integer() && x.get<long long>() >= 0);
      if (!ok) throw ConfigError("field 'seeds' must be an array of non-negative integers", "seeds");
      cfg.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  cfg.output_dir = get_field<std::string>(j, "output_dir", "output_dir", cfg.output_dir);
  cfg.dump_samples = get_field<bool>(j, "dump_samples", "dump_samples", cfg.dump_samples);
  cfg.precond_floor = get_field<double>(j, "precond_floor", "precond_floor", cfg.precond_floor);
  const std::string corr = get_field<std::string>(j, "bias_correction", "bias_correction", "paper-default");
  if (corr == "paper-default") {
    cfg.correction = BiasCorrection::kPaperDefault;
  } else if (corr == "uncorrected") {
    cfg.correction = BiasCorrection::kUncorrected;
  } else {
    throw ConfigError("field 'bias_correction' must be 'paper-default' or 'uncorrected'", "bias_correction");
  }
  cfg.init_std = get_field<double>(j, "init_std", "init_std", cfg.init_std);
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j = {{"target", target_to_json(cfg.target)},
            {"sampler", to_string(cfg.sampler)},
            {"chains", cfg.chains},
            {"samples", cfg.samples},
            {"burn_in", cfg.burn_in},
            {"thinning", cfg.thinning},
            {"seeds", cfg.seeds},
            {"dump_samples", cfg.dump_samples},
            {"precond_floor", cfg.precond_floor},
            {"bias_correction", cfg.correction == BiasCorrection::kPaperDefault ? "paper-default" : "uncorrected"},
            {"init_std", cfg.init_std}};
  if (cfg.grid) {
    j["eta"] = {{"count", cfg.grid->count}, {"min", cfg.grid->min}, {"max", cfg.grid->max}, {"log", cfg.grid->log}};
  } else if (cfg.eta) {
    j["eta"] = *cfg.eta;
  }
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + line_column(text, e.byte) + ": parse error: " + e.what());
  }
  return config_from_json(j);
}

json preset(const std::string& name, Algorithm sampler) {
  json j = {{"sampler", to_string(sampler)}};
  if (name == "funnel10" || name == "funnel50" || name == "funnel100") {
    j["target"] = name;
    j["eta"] = {{"count", 100}, {"min", name == "funnel100" ? 0.01 : 0.1}, {"max", 2.0}, {"log", true}};
    j["chains"] = 5;
    j["samples"] = 10000;
    j["seeds"] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  } else if (name == "gauss") {
    j["target"] = "gauss";
    j["eta"] = {{"count", 20}, {"min", 0.2}, {"max", 2.5}, {"log", true}};
    j["chains"] = 1;
    j["samples"] = 100000;
    j["seeds"] = {0};
  } else if (name == "logistic") {
    j["target"] = {{"name", "logistic"}, {"n", 500}, {"input_dim", 20}, {"classes", 3}, {"data_seed", 0}};
    j["eta"] = is_preconditioned(sampler) ? json{{"count", 8}, {"min", 0.05}, {"max", 2.0}, {"log", true}}
                                          : json{{"count", 8}, {"min", 0.002}, {"max", 0.05}, {"log", true}};
    j["chains"] = 1;
    j["burn_in"] = 10000;
    j["samples"] = 200;
    j["thinning"] = 50;
    j["seeds"] = {0};
  } else if (name == "bnn") {
    j["target"] = {{"name", "bnn"}, {"n", 64}, {"layers", {1, 16, 16, 1}}, {"data_seed", 0}};
    j["eta"] = is_preconditioned(sampler) ? json{{"count", 8}, {"min", 0.05}, {"max", 2.0}, {"log", true}}
                                          : json{{"count", 8}, {"min", 0.0005}, {"max", 0.02}, {"log", true}};
    j["chains"] = 1;
    j["burn_in"] = 10000;
    j["samples"] = 400;
    j["thinning"] = 100;
    j["seeds"] = {0};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected funnel10, funnel50, funnel100, gauss, logistic or bnn)");
  }
  return j;
}

BuiltTarget build_target(const TargetSpec& spec) {
  if (spec.kind == "funnel") return {make_funnel(spec.dim), nullptr};
  if (spec.kind == "gaussian") return {make_gaussian(spec.dim, spec.sigma), nullptr};
  if (spec.kind == "rosenbrock") return {make_rosenbrock(spec.a, spec.b, spec.scale), nullptr};
  if (spec.kind == "logistic") {
    auto data = std::make_shared<const LabeledDataset>(
        spec.csv.empty() ? make_gaussian_clusters(spec.data_seed, spec.n > 0 ? spec.n : 500, spec.input_dim,
                                                  spec.classes, spec.separation)
                         : load_classification_csv(spec.csv));
    return {make_logistic(data), data};
  }
  if (spec.kind == "bnn") {
    auto data = std::make_shared<const LabeledDataset>(
        spec.csv.empty() ? make_sine_regression(spec.data_seed, spec.n > 0 ? spec.n : 64, spec.noise)
                         : load_regression_csv(spec.csv));
    return {make_bnn(data, MlpShape{spec.layers, spec.activation}, spec.sigma_prior, spec.sigma_lik), data};
  }
  throw ConfigError("unknown target kind '" + spec.kind + "'", "target");
}

int GridResult::failed_runs() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const GridCell& c) { return c.failed(); }));
}

int resolve_threads(int flag_value) {
  if (const char* env = std::getenv("RUN_THREADS"); env && *env) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (flag_value > 0) return flag_value;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::optional<std::size_t> select_best(const std::vector<EtaAggregate>& per_eta, bool use_kl) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < per_eta.size(); ++i) {
    const auto& score = use_kl ? per_eta[i].mean_kl : per_eta[i].mean_log_density;
    if (!score) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double current = *(use_kl ? per_eta[*best].mean_kl : per_eta[*best].mean_log_density);
    if (use_kl ? *score < current : *score > current) best = i;
  }
  return best;
}

GridResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const BuiltTarget built = build_target(cfg.target);
  const TargetModel& target = built.model;

  GridResult result;
  result.config = cfg;
  result.etas = cfg.etas();
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_cells = result.etas.size() * n_seeds;
  const auto n_chains = static_cast<std::size_t>(cfg.chains);
  result.cells.resize(n_cells);
  if (options.keep_samples) result.samples.resize(n_cells);

  const fs::path out_dir = cfg.output_dir;
  const bool write_files = !cfg.output_dir.empty();
  if (write_files) {
    fs::create_directories(out_dir / "runs");
    if (cfg.dump_samples) fs::create_directories(out_dir / "samples");
  }

  struct CellWork {
    std::vector<RunReport> reports;
    std::atomic<std::size_t> remaining{0};
    std::vector<std::string> io_errors;
    std::mutex mutex;
  };
  std::vector<std::unique_ptr<CellWork>> work(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    work[c] = std::make_unique<CellWork>();
    work[c]->reports.resize(n_chains);
    work[c]->remaining = n_chains;
    result.cells[c].eta_index = c / n_seeds;
    result.cells[c].eta = result.etas[c / n_seeds];
    result.cells[c].seed = cfg.seeds[c % n_seeds];
  }

  auto finish_cell = [&](std::size_t c) {
    CellWork& w = *work[c];
    GridCell& cell = result.cells[c];
    cell.errors = w.io_errors;
    try {
      cell.summary = summarize(w.reports, target.marginal());
      for (const auto& e : cell.summary->errors) {
        // Degenerate statistics are reported, chain aborts count as failures.
        if (e.rfind("chain ", 0) == 0) cell.errors.push_back(e);
      }
    } catch (const std::exception& e) {
      cell.errors.push_back(std::string("summarize: ") + e.what());
    }
    if (options.keep_samples) {
      for (auto& r : w.reports) result.samples[c].push_back(std::move(r.samples));
    }
    if (write_files) {
      try {
        write_text(out_dir / "runs" / (run_stem(cell.eta_index, cell.seed) + ".json"), cell_json(result, cell).dump(2) + "\n");
      } catch (const std::exception& e) {
        cell.errors.push_back(e.what());
      }
    }
    w.reports.clear();
    w.reports.shrink_to_fit();
  };

  const std::size_t n_tasks = n_cells * n_chains;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      const std::size_t c = task / n_chains;
      const std::size_t chain = task % n_chains;
      CellWork& w = *work[c];
      const GridCell& cell = result.cells[c];
      RunReport report = run_chain(target, cfg.sampler_config(cell.eta), cell.seed, chain);
      if (write_files && cfg.dump_samples) {
        try {
          write_text(out_dir / "samples" / (run_stem(cell.eta_index, cell.seed) + "_chain" + std::to_string(chain) + ".csv"),
                     samples_csv(report));
        } catch (const std::exception& e) {
          std::lock_guard lock(w.mutex);
          w.io_errors.push_back(e.what());
        }
      }
      w.reports[chain] = std::move(report);
      if (w.remaining.fetch_sub(1) == 1) finish_cell(c);
    }
  };

  const int threads = std::max(1, std::min<int>(options.threads > 0 ? options.threads : resolve_threads(0),
                                                static_cast<int>(std::max<std::size_t>(n_tasks, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  const bool use_kl = target.marginal().has_value();
  result.criterion = use_kl ? "min_mean_kl" : "max_mean_log_density";
  for (std::size_t e = 0; e < result.etas.size(); ++e) {
    EtaAggregate agg;
    agg.eta = result.etas[e];
    std::vector<double> kl, acc, ess_m, ess_o, logd;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const GridCell& cell = result.cells[e * n_seeds + s];
      if (cell.failed()) continue;
      ++agg.ok_runs;
      const ChainSummary& sum = *cell.summary;
      if (sum.kl) kl.push_back(*sum.kl);
      if (sum.acceptance_rate) acc.push_back(*sum.acceptance_rate);
      if (sum.ess_marginal) ess_m.push_back(*sum.ess_marginal);
      if (sum.ess_other_mean) ess_o.push_back(*sum.ess_other_mean);
      logd.push_back(sum.mean_log_density);
    }
    const bool complete = agg.ok_runs == static_cast<int>(n_seeds);
    if (auto m = moments(kl); m && complete && kl.size() == n_seeds) {
      agg.mean_kl = m->mean;
      agg.sd_kl = m->sd;
    }
    if (auto m = moments(acc)) {
      agg.mean_accept = m->mean;
      agg.sd_accept = m->sd;
    }
    if (auto m = moments(ess_m)) {
      agg.mean_ess_marginal = m->mean;
      agg.sd_ess_marginal = m->sd;
    }
    if (auto m = moments(ess_o)) {
      agg.mean_ess_other = m->mean;
      agg.sd_ess_other = m->sd;
    }
    if (auto m = moments(logd); m && complete) agg.mean_log_density = m->mean;
    result.per_eta.push_back(agg);
  }
  result.best_eta_index = select_best(result.per_eta, use_kl);
  return result;
}

json summary_to_json(const ChainSummary& s) {
  json j = {{"samples", s.samples},
            {"steps", s.steps},
            {"accepted", s.accepted},
            {"acceptance_rate", optional_json(s.acceptance_rate)},
            {"floored_steps", s.floored},
            {"nonfinite_rejections", s.nonfinite_rejections},
            {"mean", vector_json(s.mean)},
            {"variance", s.variance ? vector_json(*s.variance) : json(nullptr)},
            {"ess", s.ess ? vector_json(*s.ess) : json(nullptr)},
            {"kl", optional_json(s.kl)},
            {"ess_w", optional_json(s.ess_marginal)},
            {"ess_theta_mean", optional_json(s.ess_other_mean)},
            {"mean_log_density", s.mean_log_density},
            {"errors", s.errors}};
  return j;
}

std::string format_number(std::optional<double> x) {
  if (!x) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *x);
  return buf;
}

void emit_report(const GridResult& result, const std::string& out_dir) {
  if (result.cells.empty()) throw std::invalid_argument("emit_report: empty grid");
  const fs::path dir = out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::ostringstream csv;
  csv << "eta,seed,kl,ess_w,ess_theta_mean,accept_rate\n";
  for (const GridCell& cell : result.cells) {
    const ChainSummary* s = cell.failed() ? nullptr : &*cell.summary;
    csv << format_number(cell.eta) << "," << cell.seed << "," << format_number(s ? s->kl : std::nullopt) << ","
        << format_number(s ? s->ess_marginal : std::nullopt) << "," << format_number(s ? s->ess_other_mean : std::nullopt)
        << "," << format_number(s ? s->acceptance_rate : std::nullopt) << "\n";
  }
  write_text(dir / "grid.csv", csv.str());

  json per_eta = json::array();
  for (const EtaAggregate& a : result.per_eta) {
    per_eta.push_back({{"eta", a.eta},
                       {"ok_runs", a.ok_runs},
                       {"mean_kl", optional_json(a.mean_kl)},
                       {"sd_kl", optional_json(a.sd_kl)},
                       {"mean_accept", optional_json(a.mean_accept)},
                       {"sd_accept", optional_json(a.sd_accept)},
                       {"mean_ess_w", optional_json(a.mean_ess_marginal)},
                       {"sd_ess_w", optional_json(a.sd_ess_marginal)},
                       {"mean_ess_theta", optional_json(a.mean_ess_other)},
                       {"sd_ess_theta", optional_json(a.sd_ess_other)},
                       {"mean_log_density", optional_json(a.mean_log_density)}});
  }
  json cells = json::array();
  for (const GridCell& cell : result.cells) {
    json c = cell_json(result, cell);
    c.erase("schema_version");
    c.erase("sampler");
    c.erase("target");
    c.erase("metadata");
    cells.push_back(std::move(c));
  }

  json best = {{"schema_version", kSchemaVersion},
               {"sampler", to_string(result.config.sampler)},
               {"target", result.config.target.label()},
               {"criterion", result.criterion}};
  if (result.best_eta_index) {
    const EtaAggregate& a = result.per_eta[*result.best_eta_index];
    const bool kl = result.criterion == "min_mean_kl";
    best["eta_index"] = *result.best_eta_index;
    best["eta"] = a.eta;
    best["score"] = optional_json(kl ? a.mean_kl : a.mean_log_density);
    best["score_sd"] = kl ? optional_json(a.sd_kl) : json(nullptr);
    best["mean_accept"] = optional_json(a.mean_accept);
    best["mean_ess_w"] = optional_json(a.mean_ess_marginal);
    best["sd_ess_w"] = optional_json(a.sd_ess_marginal);
    best["mean_ess_theta"] = optional_json(a.mean_ess_other);
    json per_seed = json::array();
    for (const GridCell& cell : result.cells) {
      if (cell.eta_index != *result.best_eta_index) continue;
      const ChainSummary* s = cell.failed() ? nullptr : &*cell.summary;
      per_seed.push_back({{"seed", cell.seed},
                          {"kl", optional_json(s ? s->kl : std::nullopt)},
                          {"mean_log_density", s ? json(s->mean_log_density) : json(nullptr)}});
    }
    best["per_seed"] = per_seed;
  } else {
    best["eta_index"] = nullptr;
    best["eta"] = nullptr;
  }

  json summary = {{"schema_version", kSchemaVersion},
                  {"config", config_to_json(result.config)},
                  {"etas", result.etas},
                  {"criterion", result.criterion},
                  {"best_eta_index", result.best_eta_index ? json(*result.best_eta_index) : json(nullptr)},
                  {"failed_runs", result.failed_runs()},
                  {"per_eta", per_eta},
                  {"cells", cells},
                  {"metadata", {{"generated_at", timestamp()}}}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(dir / "best.json", best.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

bool self_check(std::ostream& log) {
  bool all_ok = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    log << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    all_ok = all_ok && ok;
  };

  auto clusters = std::make_shared<const LabeledDataset>(make_gaussian_clusters(7, 60, 4, 3));
  auto sine = std::make_shared<const LabeledDataset>(make_sine_regression(7, 16));
  const std::vector<std::pair<TargetModel, double>> targets = {
      {make_gaussian(4, 1.5), 1.0},
      {make_funnel(10), 0.5},
      {make_rosenbrock(1.0, 100.0, 0.05), 1.0},
      {make_logistic(clusters), 0.3},
      {make_bnn(sine, MlpShape{{1, 8, 8, 1}}), 0.3},
  };
  RngStream rng(2024, {0, StreamPurpose::kTangent});
  for (const auto& [target, spread] : targets) {
    double worst_jvp = 0.0, worst_vhv = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd theta = spread * rng.normal_vector(target.dimension());
      const TangentVector v = sample_unit_sphere(rng, target.dimension());
      const SecondOrder r = eval_f2(target, theta, v);
      auto f = [&](double h) { return target.log_density(Eigen::VectorXd(theta + h * v.components)); };
      const double h1 = 1e-5, h2 = 1e-4;
      const double fd1 = (f(h1) - f(-h1)) / (2.0 * h1);
      const double fd2 = (f(h2) - 2.0 * f(0.0) + f(-h2)) / (h2 * h2);
      worst_jvp = std::max(worst_jvp, std::abs(r.jvp - fd1) / (1.0 + std::abs(r.jvp)));
      worst_vhv = std::max(worst_vhv, std::abs(r.vhv - fd2) / (1.0 + std::abs(r.vhv)));
    }
    report("jvp/" + target.name(), worst_jvp <= 1e-6, "max scaled error " + format_number(worst_jvp));
    report("vhv/" + target.name(), worst_vhv <= 1e-4, "max scaled error " + format_number(worst_vhv));
  }

  {
    const Eigen::Index dim = 5;
    const Eigen::VectorXd grad = rng.normal_vector(dim);
    const int draws = 50000;
    Eigen::VectorXd xs(draws);
    for (int k = 0; k < draws; ++k) {
      const TangentVector v = sample_unit_sphere(rng, dim);
      xs[k] = grad.dot(v.components) * v.components[0];
    }
    const EstimatorMoments m = estimator_moments_analytic(grad, 0);
    const double mean = xs.mean();
    const Eigen::ArrayXd c = xs.array() - mean;
    const double var = c.square().sum() / (draws - 1);
    const double m4 = c.pow(4).mean();
    const double se_mean = std::sqrt(var / draws);
    const double se_var = std::sqrt(std::max(m4 - var * var, 0.0) / draws);
    report("estimator-moments/D=5", std::abs(mean - m.mean) <= 5 * se_mean && std::abs(var - m.variance) <= 5 * se_var,
           "mean " + format_number(mean) + " vs " + format_number(m.mean) + ", var " + format_number(var) + " vs " +
               format_number(m.variance));
  }
  return all_ok;
}

}  // namespace fmala
