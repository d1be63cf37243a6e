/**
 * Copyright 2026 the fedfair authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "fedfair/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fedfair/metrics.hpp"
#include "fedfair/model.hpp"

namespace fedfair::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kSummaryHeader = "method,acc_mean,acc_std,disp_mean,disp_std,bits_total";
constexpr const char* kCurveHeader = "method,eps,accuracy,dp_disp";
constexpr const char* kDeltaHeader =
    "delta,c,g0_at_zero,g1_at_zero,eps0,eps1,opposite_sign,sign_consistent";
constexpr const char* kPsiHeader = "eps0,eps1,psi";
constexpr const char* kCellsHeader = "phase,learning_rate,alpha,value";
constexpr const char* kMergedHeader =
    "method,eps,acc_mean,acc_std,disp_mean,disp_std,bits_total";
constexpr const char* kScatterHeader = "method,disp_mean,acc_mean";

// ---------------------------------------------------------------------------
// JSON plumbing

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

template <typename T>
T get_required(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config key '" + key + "' is required");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp-4") return ModelKind::kMlp4;
  throw ConfigError("unknown model kind: " + name);
}

std::vector<double> default_eps_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(0.05 * k);
  return g;
}

// ---------------------------------------------------------------------------
// Output helpers. Every writer re-reads what it wrote and checks the header,
// so a command that returns implies its files are on disk and well formed.

std::string first_line_of(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerializationError("cannot reopen for validation: " + path);
  std::string line;
  std::getline(in, line);
  return line;
}

void write_validated(const std::string& path, const std::string& content,
                     const std::string& expected_first_line) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SerializationError("cannot open for writing: " + path);
    out << content;
    if (!out) throw SerializationError("short write: " + path);
  }
  if (first_line_of(path) != expected_first_line) {
    throw SerializationError("validation failed after writing: " + path);
  }
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

void write_config_echo(const json& config, const std::string& out_dir,
                       std::vector<std::string>& files) {
  const std::string text = emit_config(config);
  const std::string path = out_dir + "/config.json";
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SerializationError("cannot open for writing: " + path);
    out << text;
    if (!out) throw SerializationError("short write: " + path);
  }
  if (emit_config(load_config(path)) != text) {
    throw SerializationError("config echo does not round-trip: " + path);
  }
  files.push_back("config.json");
}

// ---------------------------------------------------------------------------
// Work pool: tasks run on a small thread pool, each writing only its own
// result slot (and its own files), so scheduling cannot change any output.

void run_pool(std::vector<std::function<void()>> tasks) {
  if (tasks.empty()) return;
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      try {
        tasks[k]();
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Shared train machinery

struct SeedOutcome {
  double accuracy = 0.0;
  double disparity = 0.0;
  std::size_t bits = 0;
  std::size_t clients = 1;
  RunResult run;
};

SeedOutcome run_once(const TrainSpec& spec, std::uint64_t seed) {
  const SplitBundle data = materialize_split(spec.dataset, seed);
  ProtocolConfig cfg = spec.protocol;
  cfg.train.seed = seed;
  SeedOutcome out;
  out.run = run_method(spec.method, data.train, data.test, cfg);
  out.accuracy = out.run.log.back().accuracy;
  out.disparity = out.run.log.back().disparity;
  out.bits = out.run.total_bits;
  out.clients = data.train.clients.empty() ? 1 : data.train.n_clients;
  return out;
}

SummaryStat stat_of(const std::vector<double>& values) {
  if (values.size() < 2) return SummaryStat{values.empty() ? 0.0 : values[0], 0.0};
  bool constant = true;
  for (double v : values) constant = constant && (v == values[0]);
  if (constant) return SummaryStat{values[0], 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return SummaryStat{mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

// Writes the per-seed artifacts and summary.csv shared by train and sweep.
void emit_train_outputs(const TrainSpec& spec, const std::vector<SeedOutcome>& outcomes,
                        const std::string& out_dir, std::vector<std::string>& files) {
  std::vector<double> accs, disps;
  for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
    const std::uint64_t seed = spec.seeds[k];
    const SeedOutcome& o = outcomes[k];
    const std::string log_name = "rounds_seed" + std::to_string(seed) + ".csv";
    write_round_log(o.run.log, o.clients, out_dir + "/" + log_name);
    if (first_line_of(out_dir + "/" + log_name).rfind("round,", 0) != 0) {
      throw SerializationError("validation failed after writing: " + log_name);
    }
    files.push_back(log_name);
    if (spec.method == Method::kLftEnsemble) {
      for (std::size_t m = 0; m < o.run.members.size(); ++m) {
        const std::string name = "params_seed" + std::to_string(seed) + "_member" +
                                 std::to_string(m) + ".bin";
        save_params(o.run.members[m], out_dir + "/" + name);
        load_params(out_dir + "/" + name);
        files.push_back(name);
      }
    } else {
      const std::string name = "params_seed" + std::to_string(seed) + ".bin";
      save_params(o.run.params, out_dir + "/" + name);
      load_params(out_dir + "/" + name);
      files.push_back(name);
    }
    accs.push_back(o.accuracy);
    disps.push_back(o.disparity);
  }
  for (const SeedOutcome& o : outcomes) {
    if (o.bits != outcomes.front().bits) {
      throw InvalidSpecError("bit accounting differs across seeds");
    }
  }
  const SummaryStat acc = stat_of(accs);
  const SummaryStat disp = stat_of(disps);
  std::ostringstream ss;
  ss << kSummaryHeader << "\n"
     << method_name(spec.method) << "," << fmt(acc.mean) << "," << fmt(acc.std) << ","
     << fmt(disp.mean) << "," << fmt(disp.std) << "," << outcomes.front().bits << "\n";
  write_validated(out_dir + "/summary.csv", ss.str(), kSummaryHeader);
  files.push_back("summary.csv");
}

// One sweep cell: fit on the training part minus a validation carve and
// report the final-round validation metrics (accuracy for the rate phase,
// disparity for the weight-step phase).
struct CellOutcome {
  double val_accuracy = 0.0;
  double val_disparity = 0.0;
};

CellOutcome run_validation_cell(const TrainSpec& spec, std::uint64_t seed,
                                double holdout_ratio) {
  const SplitBundle data = materialize_split(spec.dataset, seed);
  const auto [fit_part, val_part] =
      train_test_split(data.train, 1.0 - holdout_ratio, mix_seed(seed, 3));
  ProtocolConfig cfg = spec.protocol;
  cfg.train.seed = seed;
  const RunResult run = run_method(spec.method, fit_part, val_part, cfg);
  return CellOutcome{run.log.back().accuracy, run.log.back().disparity};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing

json parse_config_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("mode")) throw ConfigError("config key 'mode' is required");
    return j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
}

json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string emit_config(const json& config) { return config.dump(2) + "\n"; }

AnalyzeSpec analyze_from_json(const json& config) {
  if (get_required<std::string>(config, "mode") != "analyze") {
    throw ConfigError("analyze config must set mode=\"analyze\"");
  }
  AnalyzeSpec spec;
  if (!config.contains("clients") || !config.at("clients").is_array() ||
      config.at("clients").empty()) {
    throw ConfigError("analyze config needs a non-empty 'clients' array");
  }
  for (const json& c : config.at("clients")) {
    ClientPopulation p;
    p.x0 = Gaussian{get_required<double>(c, "mu0"), get_required<double>(c, "sigma0")};
    p.x1 = Gaussian{get_required<double>(c, "mu1"), get_required<double>(c, "sigma1")};
    p.q = get_required<double>(c, "q");
    if (!(p.q > 0.0) || !(p.q < 1.0)) {
      throw UnsupportedError("client sensitive rate q must lie strictly in (0, 1)");
    }
    if (!(p.x0.sigma > 0.0) || !(p.x1.sigma > 0.0)) {
      throw ConfigError("client sigma must be positive");
    }
    spec.population.push_back(p);
  }
  spec.eps_grid = get_or<std::vector<double>>(config, "eps_grid", default_eps_grid());
  if (spec.eps_grid.empty()) throw ConfigError("eps_grid must be non-empty");
  for (double e : spec.eps_grid) {
    if (!(e >= 0.0) || !(e <= 1.0)) throw ConfigError("eps_grid entries must lie in [0, 1]");
  }
  spec.lp_cells = get_or<std::size_t>(config, "lp_cells", 256);
  spec.psi_grid = get_or<std::size_t>(config, "psi_grid", 21);
  spec.delta_grid = get_or<std::size_t>(config, "delta_grid", 201);
  if (spec.lp_cells < 2 || spec.psi_grid < 1 || spec.delta_grid < 1) {
    throw ConfigError("grid sizes must be positive (lp_cells at least 2)");
  }
  return spec;
}

json analyze_to_json(const AnalyzeSpec& spec) {
  json clients = json::array();
  for (const ClientPopulation& p : spec.population) {
    clients.push_back({{"mu0", p.x0.mu},
                       {"sigma0", p.x0.sigma},
                       {"mu1", p.x1.mu},
                       {"sigma1", p.x1.sigma},
                       {"q", p.q}});
  }
  return json{{"mode", "analyze"},
              {"clients", clients},
              {"eps_grid", spec.eps_grid},
              {"lp_cells", spec.lp_cells},
              {"psi_grid", spec.psi_grid},
              {"delta_grid", spec.delta_grid}};
}

TrainSpec train_from_json(const json& config) {
  const std::string mode = get_required<std::string>(config, "mode");
  if (mode != "train" && mode != "sweep") {
    throw ConfigError("train config must set mode=\"train\" (or \"sweep\")");
  }
  TrainSpec spec;
  const json d = get_or<json>(config, "dataset", json::object());
  spec.dataset.kind = get_or<std::string>(d, "kind", "synthetic");
  if (spec.dataset.kind == "synthetic") {
    spec.dataset.n = get_or<std::size_t>(d, "n", 5000);
    spec.dataset.label_rate = get_or<double>(d, "label_rate", 0.6);
    spec.dataset.split = get_or<std::string>(d, "split", "medium");
    if (spec.dataset.split != "none" && spec.dataset.split != "low" &&
        spec.dataset.split != "medium" && spec.dataset.split != "high") {
      throw ConfigError("dataset split must be one of none, low, medium, high");
    }
  } else if (spec.dataset.kind == "csv") {
    spec.dataset.path = get_required<std::string>(d, "path");
    spec.dataset.schema.label_col = get_required<std::string>(d, "label_col");
    spec.dataset.schema.sensitive_col = get_required<std::string>(d, "sensitive_col");
    spec.dataset.schema.client_col = get_or<std::string>(d, "client_col", "");
    spec.dataset.schema.numeric_cols =
        get_or<std::vector<std::string>>(d, "numeric_cols", {});
    spec.dataset.schema.categorical_cols =
        get_or<std::vector<std::string>>(d, "categorical_cols", {});
  } else {
    throw ConfigError("dataset kind must be synthetic or csv");
  }
  spec.method = method_from_name(get_or<std::string>(config, "method", "fedfb"));
  spec.protocol.notion = notion_from_name(get_or<std::string>(config, "notion", "dp"));
  spec.protocol.lambda_period = get_or<std::size_t>(config, "lambda_period", 1);
  spec.protocol.quantizer.bits = get_or<int>(config, "quant_bits", 0);
  const std::vector<double> range =
      get_or<std::vector<double>>(config, "quant_range", {0.0, 2.0});
  if (range.size() != 2) throw ConfigError("quant_range must be [lo, hi]");
  spec.protocol.quantizer.lo = range[0];
  spec.protocol.quantizer.hi = range[1];
  spec.protocol.model = model_kind_from_name(get_or<std::string>(config, "model", "logistic"));
  spec.protocol.train.learning_rate = get_or<double>(config, "learning_rate", 0.005);
  spec.protocol.train.batch_size = get_or<std::size_t>(config, "batch_size", 128);
  spec.protocol.train.local_epochs = get_or<std::size_t>(config, "local_epochs", 30);
  spec.protocol.train.rounds = get_or<std::size_t>(config, "rounds", 10);
  spec.protocol.train.alpha = get_or<double>(config, "alpha", 0.1);
  spec.seeds = get_or<std::vector<std::uint64_t>>(config, "seeds", default_seeds());
  if (spec.seeds.empty()) throw ConfigError("seeds must be non-empty");
  validate_protocol(spec.protocol);
  return spec;
}

json train_to_json(const TrainSpec& spec) {
  json d;
  if (spec.dataset.kind == "synthetic") {
    d = json{{"kind", "synthetic"},
             {"n", spec.dataset.n},
             {"label_rate", spec.dataset.label_rate},
             {"split", spec.dataset.split}};
  } else {
    d = json{{"kind", "csv"},
             {"path", spec.dataset.path},
             {"label_col", spec.dataset.schema.label_col},
             {"sensitive_col", spec.dataset.schema.sensitive_col},
             {"client_col", spec.dataset.schema.client_col},
             {"numeric_cols", spec.dataset.schema.numeric_cols},
             {"categorical_cols", spec.dataset.schema.categorical_cols}};
  }
  return json{{"mode", "train"},
              {"dataset", d},
              {"method", method_name(spec.method)},
              {"notion", notion_name(spec.protocol.notion)},
              {"lambda_period", spec.protocol.lambda_period},
              {"quant_bits", spec.protocol.quantizer.bits},
              {"quant_range", {spec.protocol.quantizer.lo, spec.protocol.quantizer.hi}},
              {"model", model_kind_name(spec.protocol.model)},
              {"learning_rate", spec.protocol.train.learning_rate},
              {"batch_size", spec.protocol.train.batch_size},
              {"local_epochs", spec.protocol.train.local_epochs},
              {"rounds", spec.protocol.train.rounds},
              {"alpha", spec.protocol.train.alpha},
              {"seeds", spec.seeds}};
}

SweepSpec sweep_from_json(const json& config) {
  if (get_required<std::string>(config, "mode") != "sweep") {
    throw ConfigError("sweep config must set mode=\"sweep\"");
  }
  SweepSpec spec;
  spec.base = train_from_json(config);
  spec.alpha_grid = get_or<std::vector<double>>(
      config, "alpha_grid", {0.001, 0.05, 0.08, 0.1, 0.2, 0.5, 1.0, 2.0});
  spec.lr_grid = get_or<std::vector<double>>(config, "lr_grid", {0.001, 0.005, 0.01});
  spec.holdout_ratio = get_or<double>(config, "holdout_ratio", 0.2);
  if (spec.alpha_grid.empty() || spec.lr_grid.empty()) {
    throw ConfigError("alpha_grid and lr_grid must be non-empty");
  }
  for (double a : spec.alpha_grid) {
    if (!(a > 0.0)) throw ConfigError("alpha_grid entries must be positive");
  }
  for (double lr : spec.lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("lr_grid entries must be positive");
  }
  if (!(spec.holdout_ratio > 0.0) || !(spec.holdout_ratio < 1.0)) {
    throw ConfigError("holdout_ratio must lie strictly in (0, 1)");
  }
  return spec;
}

json sweep_to_json(const SweepSpec& spec) {
  json j = train_to_json(spec.base);
  j["mode"] = "sweep";
  j["alpha_grid"] = spec.alpha_grid;
  j["lr_grid"] = spec.lr_grid;
  j["holdout_ratio"] = spec.holdout_ratio;
  return j;
}

Dataset materialize_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.kind == "csv") {
    return load_csv(spec.path, spec.schema).dataset;
  }
  SyntheticSpec syn;
  syn.n = spec.n;
  syn.label_rate = spec.label_rate;
  syn.seed = seed;
  Dataset ds = generate_synthetic(syn);
  if (spec.split != "none") {
    ds = split_clients(ds, split_preset(spec.split), mix_seed(seed, 1));
  }
  return ds;
}

SplitBundle materialize_split(const DatasetSpec& spec, std::uint64_t seed) {
  constexpr double kTrainFraction = 0.7;
  if (spec.kind == "csv") {
    const Dataset ds = load_csv(spec.path, spec.schema).dataset;
    auto [train_part, test_part] = train_test_split(ds, kTrainFraction, mix_seed(seed, 2));
    return SplitBundle{std::move(train_part), std::move(test_part)};
  }
  SyntheticSpec syn;
  syn.n = spec.n;
  syn.label_rate = spec.label_rate;
  syn.seed = seed;
  const Dataset raw = generate_synthetic(syn);
  auto [train_part, test_part] = train_test_split(raw, kTrainFraction, mix_seed(seed, 2));
  if (spec.split != "none") {
    train_part = split_clients(train_part, split_preset(spec.split), mix_seed(seed, 1));
  }
  return SplitBundle{std::move(train_part), std::move(test_part)};
}

// ---------------------------------------------------------------------------
// Commands

std::vector<std::string> cmd_analyze(const AnalyzeSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  write_config_echo(analyze_to_json(spec), out_dir, files);

  const std::vector<std::pair<TradeoffMethod, std::string>> methods = {
      {TradeoffMethod::kCfl, "curve_cfl.csv"},
      {TradeoffMethod::kLftEnsemble, "curve_lft_ensemble.csv"},
      {TradeoffMethod::kLftFedAvg, "curve_lft_fedavg.csv"},
  };
  std::vector<std::string> rendered(methods.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    tasks.push_back([&, k] {
      const std::vector<CurvePoint> curve =
          tradeoff_curve(spec.population, methods[k].first, spec.eps_grid, spec.lp_cells);
      std::ostringstream ss;
      ss << kCurveHeader << "\n";
      for (const CurvePoint& p : curve) {
        ss << p.method << "," << fmt(p.epsilon) << "," << fmt(p.accuracy) << ","
           << fmt(p.dp_disp) << "\n";
      }
      rendered[k] = ss.str();
    });
  }
  run_pool(std::move(tasks));
  for (std::size_t k = 0; k < methods.size(); ++k) {
    write_validated(out_dir + "/" + methods[k].second, rendered[k], kCurveHeader);
    files.push_back(methods[k].second);
  }

  if (spec.population.size() == 2) {
    const DeltaReport delta = compute_delta(spec.population, spec.delta_grid);
    std::ostringstream ds;
    ds << kDeltaHeader << "\n"
       << fmt(delta.delta) << "," << fmt(delta.c) << "," << fmt(delta.g0_at_zero) << ","
       << fmt(delta.g1_at_zero) << "," << fmt(delta.eps0) << "," << fmt(delta.eps1) << ","
       << (delta.opposite_sign ? 1 : 0) << "," << (delta.sign_consistent ? 1 : 0) << "\n";
    write_validated(out_dir + "/delta.csv", ds.str(), kDeltaHeader);
    files.push_back("delta.csv");

    std::ostringstream ps;
    ps << kPsiHeader << "\n";
    const std::size_t n = delta.c > 0.0 ? spec.psi_grid : 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double e0 = n == 1 ? 0.0 : delta.c * static_cast<double>(i) / (n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        const double e1 = n == 1 ? 0.0 : delta.c * static_cast<double>(j) / (n - 1);
        ps << fmt(e0) << "," << fmt(e1) << "," << fmt(compute_psi(spec.population, e0, e1))
           << "\n";
      }
    }
    write_validated(out_dir + "/psi_surface.csv", ps.str(), kPsiHeader);
    files.push_back("psi_surface.csv");
  }
  return files;
}

std::vector<std::string> cmd_train(const TrainSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  write_config_echo(train_to_json(spec), out_dir, files);

  std::vector<SeedOutcome> outcomes(spec.seeds.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
    tasks.push_back([&, k] { outcomes[k] = run_once(spec, spec.seeds[k]); });
  }
  run_pool(std::move(tasks));
  emit_train_outputs(spec, outcomes, out_dir, files);
  return files;
}

std::vector<std::string> cmd_sweep(const SweepSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  write_config_echo(sweep_to_json(spec), out_dir, files);

  std::ostringstream cells;
  cells << kCellsHeader << "\n";

  // Phase 1: learning rate by mean validation accuracy.
  const std::size_t S = spec.base.seeds.size();
  std::vector<CellOutcome> lr_cells(spec.lr_grid.size() * S);
  std::vector<std::function<void()>> lr_tasks;
  for (std::size_t li = 0; li < spec.lr_grid.size(); ++li) {
    for (std::size_t si = 0; si < S; ++si) {
      lr_tasks.push_back([&, li, si] {
        TrainSpec cell = spec.base;
        cell.protocol.train.learning_rate = spec.lr_grid[li];
        lr_cells[li * S + si] =
            run_validation_cell(cell, spec.base.seeds[si], spec.holdout_ratio);
      });
    }
  }
  run_pool(std::move(lr_tasks));
  std::size_t best_lr = 0;
  double best_lr_acc = -1.0;
  for (std::size_t li = 0; li < spec.lr_grid.size(); ++li) {
    double mean = 0.0;
    for (std::size_t si = 0; si < S; ++si) mean += lr_cells[li * S + si].val_accuracy;
    mean /= static_cast<double>(S);
    cells << "lr," << fmt(spec.lr_grid[li]) << "," << fmt(spec.base.protocol.train.alpha)
          << "," << fmt(mean) << "\n";
    if (mean > best_lr_acc) {
      best_lr_acc = mean;
      best_lr = li;
    }
  }

  // Phase 2: alpha by the highest fairness (lowest mean validation
  // disparity) at the chosen learning rate.
  std::vector<CellOutcome> alpha_cells(spec.alpha_grid.size() * S);
  std::vector<std::function<void()>> alpha_tasks;
  for (std::size_t ai = 0; ai < spec.alpha_grid.size(); ++ai) {
    for (std::size_t si = 0; si < S; ++si) {
      alpha_tasks.push_back([&, ai, si] {
        TrainSpec cell = spec.base;
        cell.protocol.train.learning_rate = spec.lr_grid[best_lr];
        cell.protocol.train.alpha = spec.alpha_grid[ai];
        alpha_cells[ai * S + si] =
            run_validation_cell(cell, spec.base.seeds[si], spec.holdout_ratio);
      });
    }
  }
  run_pool(std::move(alpha_tasks));
  std::size_t best_alpha = 0;
  double best_disp = std::numeric_limits<double>::infinity();
  for (std::size_t ai = 0; ai < spec.alpha_grid.size(); ++ai) {
    double mean = 0.0;
    for (std::size_t si = 0; si < S; ++si) mean += alpha_cells[ai * S + si].val_disparity;
    mean /= static_cast<double>(S);
    cells << "alpha," << fmt(spec.lr_grid[best_lr]) << "," << fmt(spec.alpha_grid[ai]) << ","
          << fmt(mean) << "\n";
    if (mean < best_disp) {
      best_disp = mean;
      best_alpha = ai;
    }
  }
  write_validated(out_dir + "/cells.csv", cells.str(), kCellsHeader);
  files.push_back("cells.csv");

  const json choice = {{"learning_rate", spec.lr_grid[best_lr]},
                       {"alpha", spec.alpha_grid[best_alpha]}};
  write_validated(out_dir + "/choice.json", choice.dump(2) + "\n", "{");
  files.push_back("choice.json");

  // Retrain the chosen cell on each seed's full training part and report
  // the test-part metrics.
  TrainSpec chosen = spec.base;
  chosen.protocol.train.learning_rate = spec.lr_grid[best_lr];
  chosen.protocol.train.alpha = spec.alpha_grid[best_alpha];
  std::vector<SeedOutcome> outcomes(S);
  std::vector<std::function<void()>> final_tasks;
  for (std::size_t si = 0; si < S; ++si) {
    final_tasks.push_back(
        [&, si] { outcomes[si] = run_once(chosen, spec.base.seeds[si]); });
  }
  run_pool(std::move(final_tasks));
  emit_train_outputs(chosen, outcomes, out_dir, files);
  return files;
}

std::vector<std::string> cmd_report(const std::vector<std::string>& run_dirs,
                                    const std::string& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  struct Row {
    std::string method;
    double eps = 0.0;
    std::string rest;  // acc_mean,...,bits_total as written
    double acc_mean = 0.0;
    double disp_mean = 0.0;
  };
  std::vector<Row> rows;
  for (const std::string& dir : run_dirs) {
    const std::string summary_path = dir + "/summary.csv";
    std::ifstream in(summary_path, std::ios::binary);
    if (!in) throw MissingSummaryError("no summary.csv under " + dir);
    std::string header;
    std::getline(in, header);
    if (header != kSummaryHeader) {
      throw MissingSummaryError("unrecognized summary header in " + summary_path);
    }
    double eps = 0.0;
    if (fs::exists(dir + "/config.json")) {
      eps = get_or<double>(load_config(dir + "/config.json"), "eps", 0.0);
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      Row row;
      row.eps = eps;
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw MissingSummaryError("malformed summary row in " + summary_path);
      }
      row.method = line.substr(0, comma);
      row.rest = line.substr(comma + 1);
      std::istringstream fields(row.rest);
      std::string acc_mean, acc_std, disp_mean;
      std::getline(fields, acc_mean, ',');
      std::getline(fields, acc_std, ',');
      std::getline(fields, disp_mean, ',');
      try {
        row.acc_mean = std::stod(acc_mean);
        row.disp_mean = std::stod(disp_mean);
      } catch (const std::exception&) {
        throw MissingSummaryError("malformed summary row in " + summary_path);
      }
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw MissingSummaryError("no summary rows found");
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.eps < b.eps;
  });

  fs::create_directories(out_dir);
  std::vector<std::string> files;
  std::ostringstream merged;
  merged << kMergedHeader << "\n";
  for (const Row& r : rows) merged << r.method << "," << fmt(r.eps) << "," << r.rest << "\n";
  write_validated(out_dir + "/merged.csv", merged.str(), kMergedHeader);
  files.push_back("merged.csv");

  std::ostringstream scatter;
  scatter << kScatterHeader << "\n";
  for (const Row& r : rows) {
    scatter << r.method << "," << fmt(r.disp_mean) << "," << fmt(r.acc_mean) << "\n";
  }
  write_validated(out_dir + "/scatter.csv", scatter.str(), kScatterHeader);
  files.push_back("scatter.csv");
  return files;
}

// ---------------------------------------------------------------------------
// Entry point

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw ConfigError("empty entry in --seeds");
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--seeds entries must be non-negative integers: " + item);
    }
  }
  if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
  return seeds;
}

std::string default_out_dir(const std::string& config_path, const std::string& mode) {
  const char* root = std::getenv("FEDFAIR_OUT_ROOT");
  if (root == nullptr || *root == '\0') {
    throw ConfigError("no --out given and FEDFAIR_OUT_ROOT is not set");
  }
  const std::string stem =
      config_path.empty() ? mode : fs::path(config_path).stem().string();
  return std::string(root) + "/" + stem;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"fedfair: fair federated learning laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seeds_csv;
  int quant_bits = -1;
  std::vector<std::string> run_dirs;

  CLI::App* analyze = app.add_subcommand("analyze", "closed-form population study");
  analyze->add_option("--config", config_path, "JSON experiment config")->required();
  analyze->add_option("--out", out_dir, "output directory");

  CLI::App* train = app.add_subcommand("train", "federated simulation over seeds");
  train->add_option("--config", config_path, "JSON experiment config")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seeds", seeds_csv, "comma-separated replicate seeds");
  train->add_option("--quant-bits", quant_bits, "statistic quantizer bits (0 = none)");

  CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter sweep");
  sweep->add_option("--config", config_path, "JSON experiment config")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--seeds", seeds_csv, "comma-separated replicate seeds");
  sweep->add_option("--quant-bits", quant_bits, "statistic quantizer bits (0 = none)");

  CLI::App* report = app.add_subcommand("report", "merge run directories");
  report->add_option("--config", config_path, "JSON config with a 'runs' array");
  report->add_option("--out", out_dir, "output directory");
  report->add_option("dirs", run_dirs, "run directories with summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::vector<std::string> files;
    if (analyze->parsed()) {
      const AnalyzeSpec spec = analyze_from_json(load_config(config_path));
      if (out_dir.empty()) out_dir = default_out_dir(config_path, "analyze");
      files = cmd_analyze(spec, out_dir);
    } else if (train->parsed() || sweep->parsed()) {
      const json config = load_config(config_path);
      if (out_dir.empty()) {
        out_dir = default_out_dir(config_path, train->parsed() ? "train" : "sweep");
      }
      auto apply_overrides = [&](TrainSpec& t) {
        if (!seeds_csv.empty()) t.seeds = parse_seed_list(seeds_csv);
        if (quant_bits >= 0) {
          t.protocol.quantizer.bits = quant_bits;
          validate_protocol(t.protocol);
        }
      };
      if (train->parsed()) {
        TrainSpec spec = train_from_json(config);
        if (get_required<std::string>(config, "mode") != "train") {
          throw ConfigError("config mode does not match the train subcommand");
        }
        apply_overrides(spec);
        files = cmd_train(spec, out_dir);
      } else {
        SweepSpec spec = sweep_from_json(config);
        apply_overrides(spec.base);
        files = cmd_sweep(spec, out_dir);
      }
    } else {
      if (!config_path.empty()) {
        const json config = load_config(config_path);
        const auto extra = get_or<std::vector<std::string>>(config, "runs", {});
        run_dirs.insert(run_dirs.end(), extra.begin(), extra.end());
      }
      if (out_dir.empty()) out_dir = default_out_dir(config_path, "report");
      files = cmd_report(run_dirs, out_dir);
    }
    for (const std::string& f : files) {
      if (!fs::exists(fs::path(out_dir) / f)) {
        throw SerializationError("output file missing after write: " + f);
      }
      std::cout << "wrote " << out_dir << "/" << f << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fedfair::cli
