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
#ifndef FEDFAIR_CLI_HPP_
#define FEDFAIR_CLI_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedfair/data.hpp"
#include "fedfair/federation.hpp"
#include "fedfair/population.hpp"

namespace fedfair::cli {

// Configs are JSON objects. parse_* fills defaults and validates;
// emit_config renders the canonical form (sorted keys, two-space indent,
// trailing newline), so parse -> emit -> parse is the identity.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config(const std::string& path);
std::string emit_config(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// analyze: closed-form population study.
//
// Config keys: mode="analyze"; clients=[{mu0,mu1,sigma0,sigma1,q}...];
// eps_grid (default 0..0.5 step 0.05); lp_cells (256); psi_grid (21);
// delta_grid (201). Every client needs q strictly inside (0,1); degenerate
// rates raise UnsupportedError.
struct AnalyzeSpec {
  PopulationSpec population;
  std::vector<double> eps_grid;
  std::size_t lp_cells = 256;
  std::size_t psi_grid = 21;
  std::size_t delta_grid = 201;
};

AnalyzeSpec analyze_from_json(const nlohmann::json& config);
nlohmann::json analyze_to_json(const AnalyzeSpec& spec);

// Emits config.json, one tradeoff curve CSV per method
// (curve_<method>.csv: method,eps,accuracy,dp_disp) and, for two-client
// specs, delta.csv (the minimum ensemble disparity with its condition
// flags) and psi_surface.csv (eps0,eps1,psi over the budget square).
// Returns the files written, relative to out_dir.
std::vector<std::string> cmd_analyze(const AnalyzeSpec& spec, const std::string& out_dir);

// ---------------------------------------------------------------------------
// train: federated simulation, replicated over seeds.
//
// Config keys: mode="train"; dataset{kind="synthetic"|"csv", n, label_rate,
// split in {none,low,medium,high}, path, label_col, sensitive_col,
// client_col, numeric_cols, categorical_cols}; method; notion;
// lambda_period; quant_bits; quant_range=[lo,hi]; model; learning_rate;
// batch_size; local_epochs; rounds; alpha; seeds.
//
// Per replicate seed s the synthetic draw uses seed s, the 70/30
// train/test split uses mix_seed(s, 2), the client split of the training
// part uses mix_seed(s, 1), and training uses train.seed = s, so every
// seed is one end-to-end draw. Runs fit on the training part and report
// on the held-out test part. CSV datasets are fixed across seeds but get
// the same per-seed 70/30 split.
struct DatasetSpec {
  std::string kind = "synthetic";  // "synthetic" | "csv"
  std::size_t n = 5000;
  double label_rate = 0.6;
  std::string split = "medium";    // "none" | "low" | "medium" | "high"
  std::string path;                // csv only
  CsvSchema schema;                // csv only
};

struct TrainSpec {
  DatasetSpec dataset;
  Method method = Method::kFedFb;
  ProtocolConfig protocol;
  std::vector<std::uint64_t> seeds;
};

TrainSpec train_from_json(const nlohmann::json& config);
nlohmann::json train_to_json(const TrainSpec& spec);

// Full dataset for one seed: synthetic draw plus client split (CSV loads
// are seed-independent). No train/test carve; runs use materialize_split.
Dataset materialize_dataset(const DatasetSpec& spec, std::uint64_t seed);

// One replicate's data under the documented seed contract: the
// client-partitioned training part and the held-out test part.
struct SplitBundle {
  Dataset train;
  Dataset test;
};
SplitBundle materialize_split(const DatasetSpec& spec, std::uint64_t seed);

// Emits config.json, rounds_seed<s>.csv per seed, final parameter
// checkpoints (params_seed<s>.bin, or member<k> files for the ensemble),
// and summary.csv with the single row
// method,acc_mean,acc_std,disp_mean,disp_std,bits_total aggregated from
// each seed's final round on its test part.
std::vector<std::string> cmd_train(const TrainSpec& spec, const std::string& out_dir);

// ---------------------------------------------------------------------------
// sweep: hyperparameter selection around cmd_train.
//
// Extra config keys: alpha_grid, lr_grid, holdout_ratio (default 0.2).
// Selection runs on a validation part carved from each seed's training
// part with mix_seed(s, 3): the learning rate is picked first by mean
// validation accuracy, then alpha at that rate by the lowest mean
// validation disparity (the highest-fairness rule); ties keep the
// earliest grid entry. The chosen pair is retrained on the full training
// part and summarized on the test part.
struct SweepSpec {
  TrainSpec base;
  std::vector<double> alpha_grid;
  std::vector<double> lr_grid;
  double holdout_ratio = 0.2;
};

SweepSpec sweep_from_json(const nlohmann::json& config);
nlohmann::json sweep_to_json(const SweepSpec& spec);

// Emits config.json, cells.csv (phase,learning_rate,alpha,value with one
// row per grid evaluation), choice.json (the selected pair), and
// summary.csv for the selected configuration.
std::vector<std::string> cmd_sweep(const SweepSpec& spec, const std::string& out_dir);

// ---------------------------------------------------------------------------
// report: merge run directories produced by cmd_train / cmd_sweep.
//
// Every run dir must hold a summary.csv (else MissingSummaryError). The
// optional "eps" field of the run's config.json (default 0) becomes the
// second sort key after the method name. Emits merged.csv
// (method,eps,acc_mean,acc_std,disp_mean,disp_std,bits_total) and
// scatter.csv (method,disp_mean,acc_mean).
std::vector<std::string> cmd_report(const std::vector<std::string>& run_dirs,
                                    const std::string& out_dir);

// ---------------------------------------------------------------------------
// Entry point behind main(). Subcommands analyze|train|sweep|report with
// flags --config PATH, --out DIR, --seeds s1,s2,..., --quant-bits N, and
// positional run directories for report. When --out is missing the output
// directory is $FEDFAIR_OUT_ROOT/<config stem>. Returns 0 only when every
// output file was written and re-validated.
int run(int argc, const char* const* argv);

}  // namespace fedfair::cli

#endif  // FEDFAIR_CLI_HPP_
