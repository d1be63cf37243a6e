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
#ifndef FEDFAIR_FEDERATION_HPP_
#define FEDFAIR_FEDERATION_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/data.hpp"
#include "fedfair/fairbatch.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/model.hpp"
#include "fedfair/server.hpp"

namespace fedfair {

// The five training methods the simulator provides.
enum class Method { kFedAvg, kFedFb, kLftFedAvg, kLftEnsemble, kCfl };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

// Shared run configuration. lambda_period is the update cadence k: the
// weights move on rounds where t % k == 0 (rounds are 1-based), so k larger
// than the round count freezes lambda at its initialization.
struct ProtocolConfig {
  Notion notion = Notion::kDp;
  std::size_t lambda_period = 1;
  Quantizer quantizer;  // applies to statistic payloads only
  ModelKind model = ModelKind::kLogistic;
  TrainConfig train;    // rounds = T, alpha, plus the local SGD settings
};

void validate_protocol(const ProtocolConfig& config);

// One log line per round, measured on the evaluation dataset with the
// aggregated model's probability output (for ensembles, the mean member
// probability): group rates are mean predicted probabilities, so the
// rate-based disparities compare expected Bernoulli outcomes, while
// accuracy thresholds at 0.5. Client-parity disparity in federated runs
// instead tracks the spread of per-client mean training losses, since
// evaluation splits need not carry a client assignment. `stats` holds the
// round's reconstructed global statistics when the method shares them.
struct RoundRecord {
  std::size_t round = 0;
  std::vector<double> lambda;
  std::vector<double> stats;
  double outer_obj = 0.0;
  double accuracy = 0.0;
  double disparity = 0.0;
  std::size_t bits_sent = 0;
};

struct RunResult {
  ModelParams params;                          // final aggregated parameters
  LambdaWeights lambda;                        // final server weights (when global)
  std::vector<ModelParams> members;            // final per-client parameters
  std::vector<LambdaWeights> client_lambdas;   // per-client weights (local methods)
  std::vector<RoundRecord> log;
  std::vector<std::vector<RoundMessage>> message_trace;  // [round][client]
  std::size_t total_bits = 0;
};

// Determinism contract shared by all runs: the global initialization is
// init_params(model, din, train.seed) and the local pass of client i in
// round t (1-based) draws its shuffle stream from mix_seed(train.seed, t, i).
// Centralized runs are the single-client case i = 0. Clients are reduced in
// id order, so results do not depend on scheduling.
//
// Model inputs: every run trains on the group-augmented view of the data,
// with_group_column(ds), so the hypothesis class conditions on the sensitive
// attribute and din = d + 1. Checkpointed parameters expect that input
// layout; the predictor helpers below rebuild it from raw rows.
//
// Weight schedule: a run configured with step size alpha applies the
// decaying step alpha / t on round t, which settles the weights instead of
// orbiting the target.

// Fair federated training: clients train on lambda-weighted losses, upload
// parameters plus statistic payloads, the server reconstructs the global
// statistics by secure summation and steps lambda every lambda_period
// rounds. The statistic disparity column of the log matches the notion.
RunResult fedfb_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config);

// Parameter-only federation: same loop with all-ones weights and no
// statistic payloads. Equals fedfb_run with lambda_period > rounds up to
// the absent payloads.
RunResult fedavg_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config);

// Local fair training + parameter averaging: every client trains to
// completion on its own data, adjusting its own weights from local-only
// statistics (local base rates), with nothing broadcast back. The reported
// global model is the per-round sample-weighted parameter average of the
// still-independent local models; weights never leave the clients.
RunResult lft_fedavg_run(const Dataset& train, const Dataset& eval_ds,
                         const ProtocolConfig& config);

// Local fair training + ensembling: every client trains to completion with
// no communication; the global predictor is the mean member probability.
RunResult lft_ensemble_run(const Dataset& train, const Dataset& eval_ds,
                           const ProtocolConfig& config);

// Centralized fair training on the pooled samples (client assignment is
// kept only for diagnostics). The single-client instance of the same loop.
RunResult cfl_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config);

RunResult run_method(Method m, const Dataset& train, const Dataset& eval_ds,
                     const ProtocolConfig& config);

// Self-evaluating variants: train and report on the same dataset.
RunResult fedfb_run(const Dataset& ds, const ProtocolConfig& config);
RunResult fedavg_run(const Dataset& ds, const ProtocolConfig& config);
RunResult lft_fedavg_run(const Dataset& ds, const ProtocolConfig& config);
RunResult lft_ensemble_run(const Dataset& ds, const ProtocolConfig& config);
RunResult cfl_run(const Dataset& ds, const ProtocolConfig& config);
RunResult run_method(Method m, const Dataset& ds, const ProtocolConfig& config);

// Copy of ds whose feature matrix gains the group id as one extra trailing
// column: the input view every run trains on.
Dataset with_group_column(const Dataset& ds);

// Predictors over raw rows (x of length din - 1 plus the group argument);
// each appends the group column before applying the model.
// probability_predictor returns the model output, decision_predictor the
// thresholded deployment of it, ensemble_predictor the mean output across
// members. Run logs and summaries report probability predictors, so group
// rates are expected Bernoulli outcomes while accuracy thresholds at 0.5.
Predictor probability_predictor(const ModelParams& params);
Predictor decision_predictor(const ModelParams& params);
Predictor ensemble_predictor(const std::vector<ModelParams>& members);

// The disparity column used in logs and summaries for each notion.
double notion_disparity(const EvalReport& report, Notion notion);

// Writes the per-round log as CSV with header
// round,client_count,lambda_json,outer_obj,accuracy,disparity,bits_sent.
void write_round_log(const std::vector<RoundRecord>& log, std::size_t client_count,
                     const std::string& path);

}  // namespace fedfair

#endif  // FEDFAIR_FEDERATION_HPP_
