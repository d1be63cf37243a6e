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
#include "fedfair/federation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace fedfair {
namespace {

enum class LoopMode { kPlainAvg, kGlobalFair };

// Per-notion presence requirements on the merged counts, checked up front so
// runs fail before any training happens.
void require_present(Notion notion, const GroupCounts& counts) {
  const std::size_t A = counts.groups;
  switch (notion) {
    case Notion::kDp:
      for (std::size_t a = 0; a < A; ++a) {
        if (counts.n_star_a(a) == 0) {
          throw MissingGroupError("group " + std::to_string(a) + " has no samples");
        }
      }
      break;
    case Notion::kEo:
      for (std::size_t a = 0; a < A; ++a) {
        if (counts.n_ya(1, a) == 0) {
          throw MissingGroupError("group " + std::to_string(a) + " has no positive samples");
        }
      }
      break;
    case Notion::kEod:
      for (int y = 0; y < 2; ++y) {
        for (std::size_t a = 0; a < A; ++a) {
          if (counts.n_ya(y, a) == 0) {
            throw MissingGroupError("cell (label " + std::to_string(y) + ", group " +
                                    std::to_string(a) + ") is empty");
          }
        }
      }
      break;
    case Notion::kCp:
      for (std::size_t i = 0; i < counts.clients; ++i) {
        if (counts.n_client(i) == 0) {
          throw EmptyClientError("client " + std::to_string(i) + " has no samples");
        }
      }
      break;
  }
}

std::vector<Dataset> make_clients(const Dataset& ds) {
  if (ds.clients.empty() || ds.n_clients <= 1) {
    Dataset solo = ds;
    solo.clients.clear();
    solo.n_clients = 1;
    return {std::move(solo)};
  }
  std::vector<Dataset> parts;
  parts.reserve(ds.n_clients);
  for (std::size_t i = 0; i < ds.n_clients; ++i) parts.push_back(client_view(ds, i));
  return parts;
}

std::vector<double> per_sample_weights(const CellWeights& cw, const Dataset& part,
                                       int global_client) {
  std::vector<double> w(part.n);
  for (std::size_t s = 0; s < part.n; ++s) {
    w[s] = weight_for(cw, part.labels[s], part.groups[s], global_client);
  }
  return w;
}

std::vector<double> per_sample_losses(const ModelParams& params, const Dataset& part) {
  std::vector<double> loss(part.n);
  for (std::size_t s = 0; s < part.n; ++s) {
    loss[s] = bce_loss(forward(params, part.features.data() + s * part.d), part.labels[s]);
  }
  return loss;
}

// Client-side statistic payload under the global count context. The
// demographic-parity contribution mirrors the arithmetic of compute_stats
// term by term so the single-client reconstruction is bit-identical to the
// centralized statistic.
std::vector<double> encode_stats(Notion notion, const std::vector<double>& losses,
                                 const Dataset& part, const GroupCounts& global) {
  const std::size_t A = global.groups;
  std::vector<double> cell_sum(2 * A, 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < part.n; ++s) {
    cell_sum[static_cast<std::size_t>(part.labels[s]) * A +
             static_cast<std::size_t>(part.groups[s])] += losses[s];
    total += losses[s];
  }
  auto cell_mean = [&](int y, std::size_t a) {
    const std::int64_t n = global.n_ya(y, a);
    if (n == 0) return 0.0;
    return cell_sum[static_cast<std::size_t>(y) * A + a] / static_cast<double>(n);
  };
  std::vector<double> out;
  switch (notion) {
    case Notion::kDp: {
      auto lp = [&](int y, std::size_t a) {
        return (static_cast<double>(global.n_ya(y, a)) /
                static_cast<double>(global.n_star_a(a))) *
               cell_mean(y, a);
      };
      const double base0 =
          static_cast<double>(global.n_ya(0, 0)) / static_cast<double>(global.n_star_a(0));
      for (std::size_t a = 1; a < A; ++a) {
        const double base_a =
            static_cast<double>(global.n_ya(0, a)) / static_cast<double>(global.n_star_a(a));
        out.push_back(-lp(0, 0) + lp(1, 0) + lp(0, a) - lp(1, a) + base0 - base_a);
      }
      break;
    }
    case Notion::kEo:
      for (std::size_t a = 0; a < A; ++a) out.push_back(cell_mean(1, a));
      break;
    case Notion::kEod:
      for (int y = 0; y < 2; ++y) {
        for (std::size_t a = 0; a < A; ++a) out.push_back(cell_mean(y, a));
      }
      break;
    case Notion::kCp:
      out.push_back(total / static_cast<double>(part.n));
      break;
  }
  return out;
}

// Harness-side diagnostic: the global statistics of one shared predictor on
// the full dataset (used for the log when the server cannot reconstruct).
FStatistics pooled_stats(Notion notion, const Predictor& pred, const Dataset& ds,
                         const GroupCounts& counts) {
  std::vector<double> loss(ds.n);
  for (std::size_t s = 0; s < ds.n; ++s) {
    const double p = pred(ds.features.data() + s * ds.d, ds.groups[s]);
    loss[s] = bce_loss(clamp(p, 1e-7, 1.0 - 1e-7), ds.labels[s]);
  }
  const GroupLossReport report = compute_group_losses(
      loss, ds.labels, ds.groups, ds.clients, counts.groups, counts.clients);
  return compute_stats(notion, report, counts);
}

// Client-parity spread: largest gap between per-client mean training losses.
double client_loss_spread(const std::vector<std::vector<double>>& local_losses) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const std::vector<double>& losses : local_losses) {
    if (losses.empty()) continue;
    double sum = 0.0;
    for (double v : losses) sum += v;
    const double mean = sum / static_cast<double>(losses.size());
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  if (!(hi > lo)) return 0.0;
  return hi - lo;
}

RoundRecord make_record(std::size_t round, const std::vector<double>& lambda,
                        const FStatistics& stats, double accuracy, double disparity,
                        std::size_t bits) {
  RoundRecord rec;
  rec.round = round;
  rec.lambda = lambda;
  rec.stats = stats.values;
  rec.outer_obj = outer_objective(stats);
  rec.accuracy = accuracy;
  rec.disparity = disparity;
  rec.bits_sent = bits;
  return rec;
}

RunResult run_rounds(const Dataset& raw, const Dataset& eval_ds, const ProtocolConfig& cfg,
                     LoopMode mode) {
  validate_protocol(cfg);
  validate_dataset(raw);
  validate_dataset(eval_ds);
  const Dataset ds = with_group_column(raw);
  const std::vector<Dataset> parts = make_clients(ds);
  const std::size_t I = parts.size();

  std::vector<GroupCounts> per_counts;
  per_counts.reserve(I);
  for (const Dataset& p : parts) {
    per_counts.push_back(count_groups(p.labels, p.groups, {}, ds.n_groups, 1));
  }
  FairnessServer server = FairnessServer::create(cfg.notion, per_counts, cfg.train.alpha);
  require_present(cfg.notion, server.counts);

  ModelParams params = init_params(cfg.model, ds.d, cfg.train.seed);
  RunResult res;
  res.members.resize(I);

  for (std::size_t t = 1; t <= cfg.train.rounds; ++t) {
    const bool update = (t % cfg.lambda_period) == 0;
    const double alpha_t = cfg.train.alpha / static_cast<double>(t);
    std::vector<RoundMessage> msgs(I);
    std::vector<std::vector<double>> local_losses(I);
    for (std::size_t i = 0; i < I; ++i) {
      const Dataset& part = parts[i];
      const std::vector<double> w = per_sample_weights(
          sample_weights(server.lambda, server.counts), part, static_cast<int>(i));
      TrainConfig local_cfg = cfg.train;
      local_cfg.seed = mix_seed(cfg.train.seed, t, i);
      RoundMessage& m = msgs[i];
      m.params = sgd_train(params, part.features, part.labels, w, local_cfg);
      m.sample_count = static_cast<std::int64_t>(part.n);
      local_losses[i] = per_sample_losses(m.params, part);
      if (mode == LoopMode::kGlobalFair) {
        m.stats = encode_stats(cfg.notion, local_losses[i], part, server.counts);
        m.bit_cost = payload_bits(cfg.quantizer, m.stats.size());
      }
    }

    params = fedavg_aggregate(msgs);

    FStatistics stats;
    stats.notion = cfg.notion;
    std::vector<double> lambda_column;
    if (mode == LoopMode::kGlobalFair) {
      stats = server.step(msgs, cfg.quantizer, update, alpha_t);
      lambda_column = server.lambda.v;
    } else {
      // Diagnostic: statistics of the aggregated model on the pooled data.
      const ModelParams snapshot = params;
      stats = pooled_stats(
          cfg.notion,
          [&snapshot](const double* x, int) { return forward(snapshot, x); }, ds,
          count_groups(ds.labels, ds.groups, ds.clients, ds.n_groups,
                       ds.clients.empty() ? 1 : ds.n_clients));
      lambda_column = server.lambda.v;
    }

    std::size_t bits = 0;
    for (const RoundMessage& m : msgs) bits += m.bit_cost;
    res.total_bits += bits;

    const EvalReport report = evaluate(probability_predictor(params), eval_ds);
    const double disparity = cfg.notion == Notion::kCp
                                 ? client_loss_spread(local_losses)
                                 : notion_disparity(report, cfg.notion);
    res.log.push_back(make_record(t, lambda_column, stats, report.accuracy, disparity, bits));
    for (std::size_t i = 0; i < I; ++i) res.members[i] = msgs[i].params;
    res.message_trace.push_back(std::move(msgs));
  }

  res.params = params;
  res.lambda = server.lambda;
  return res;
}

// Centralized fair-reweighting loop; also the engine behind every ensemble
// member. `train` must already carry the group column; evaluation runs on
// the raw `eval_ds` per round. Per-round parameters land in message_trace.
RunResult run_centralized(const Dataset& train, const Dataset& eval_ds,
                          const ProtocolConfig& cfg) {
  validate_protocol(cfg);
  validate_dataset(train);
  const GroupCounts counts =
      count_groups(train.labels, train.groups, {}, train.n_groups, 1);
  require_present(cfg.notion, counts);
  LambdaWeights lambda = init_lambda(cfg.notion, counts);
  ModelParams params = init_params(cfg.model, train.d, cfg.train.seed);

  RunResult res;
  for (std::size_t t = 1; t <= cfg.train.rounds; ++t) {
    const std::vector<double> w =
        per_sample_weights(sample_weights(lambda, counts), train, 0);
    TrainConfig local_cfg = cfg.train;
    local_cfg.seed = mix_seed(cfg.train.seed, t, 0);
    params = sgd_train(params, train.features, train.labels, w, local_cfg);
    const std::vector<double> losses = per_sample_losses(params, train);
    const GroupLossReport report = compute_group_losses(
        losses, train.labels, train.groups, {}, train.n_groups, 1);
    const FStatistics stats = compute_stats(cfg.notion, report, counts);
    if ((t % cfg.lambda_period) == 0) {
      lambda = update_lambda(lambda, stats, cfg.train.alpha / static_cast<double>(t), counts);
    }
    const EvalReport eval = evaluate(probability_predictor(params), eval_ds);
    const double disparity = notion_disparity(eval, cfg.notion);
    res.log.push_back(make_record(t, lambda.v, stats, eval.accuracy, disparity, 0));
    RoundMessage m;
    m.params = params;
    m.sample_count = static_cast<std::int64_t>(train.n);
    res.message_trace.push_back({std::move(m)});
  }
  res.params = params;
  res.lambda = lambda;
  res.members = {res.params};
  return res;
}

// Client-parity spread of one shared predictor: largest gap between the
// per-partition mean losses it incurs on the clients' own (group-augmented)
// data.
double partition_loss_spread(const Predictor& pred, const std::vector<Dataset>& parts) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Dataset& part : parts) {
    double sum = 0.0;
    for (std::size_t s = 0; s < part.n; ++s) {
      const double p = pred(part.features.data() + s * part.d, part.groups[s]);
      sum += bce_loss(clamp(p, 1e-7, 1.0 - 1e-7), part.labels[s]);
    }
    const double mean = sum / static_cast<double>(part.n);
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  if (!(hi > lo)) return 0.0;
  return hi - lo;
}

// Shared engine of the two LFT baselines: every client trains to completion
// on its own partition with its own local weights and never communicates.
// The per-round global model is a read-only combination of the still
// independent local models: their sample-weighted parameter average when
// average_params is set, otherwise their output mean. Nothing is broadcast
// back, so client trajectories do not depend on each other.
RunResult run_local_fair(const Dataset& train, const Dataset& eval_ds,
                         const ProtocolConfig& cfg, bool average_params) {
  validate_protocol(cfg);
  validate_dataset(train);
  validate_dataset(eval_ds);
  const Dataset ds = with_group_column(train);
  const std::vector<Dataset> parts = make_clients(ds);
  std::vector<RunResult> member_runs;
  member_runs.reserve(parts.size());
  for (const Dataset& part : parts) {
    member_runs.push_back(run_centralized(part, part, cfg));
  }
  const GroupCounts counts = count_groups(ds.labels, ds.groups, ds.clients, ds.n_groups,
                                          ds.clients.empty() ? 1 : ds.n_clients);
  RunResult res;
  for (std::size_t t = 0; t < cfg.train.rounds; ++t) {
    std::vector<RoundMessage> msgs(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      msgs[i].params = member_runs[i].message_trace[t][0].params;
      msgs[i].sample_count = static_cast<std::int64_t>(parts[i].n);
    }
    Predictor combined;
    if (average_params) {
      res.params = fedavg_aggregate(msgs);
      combined = probability_predictor(res.params);
    } else {
      std::vector<ModelParams> round_members;
      round_members.reserve(msgs.size());
      for (const RoundMessage& m : msgs) round_members.push_back(m.params);
      combined = ensemble_predictor(round_members);
    }
    const FStatistics stats = pooled_stats(cfg.notion, combined, ds, counts);
    const EvalReport report = evaluate(combined, eval_ds);
    const double disparity = cfg.notion == Notion::kCp
                                 ? partition_loss_spread(combined, parts)
                                 : notion_disparity(report, cfg.notion);
    res.log.push_back(make_record(t + 1, {}, stats, report.accuracy, disparity, 0));
    res.message_trace.push_back(std::move(msgs));
  }
  for (RunResult& r : member_runs) {
    res.members.push_back(std::move(r.params));
    res.client_lambdas.push_back(std::move(r.lambda));
  }
  return res;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kFedAvg:
      return "fedavg";
    case Method::kFedFb:
      return "fedfb";
    case Method::kLftFedAvg:
      return "lft_fedavg";
    case Method::kLftEnsemble:
      return "lft_ensemble";
    case Method::kCfl:
      return "cfl";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "fedfb") return Method::kFedFb;
  if (name == "lft_fedavg") return Method::kLftFedAvg;
  if (name == "lft_ensemble") return Method::kLftEnsemble;
  if (name == "cfl") return Method::kCfl;
  throw InvalidSpecError("unknown method: " + name);
}

void validate_protocol(const ProtocolConfig& config) {
  validate_train_config(config.train);
  validate_quantizer(config.quantizer);
  if (config.lambda_period == 0) throw ConfigError("lambda_period must be at least 1");
}

double notion_disparity(const EvalReport& report, Notion notion) {
  switch (notion) {
    case Notion::kDp:
      return report.dp_disp_multi;
    case Notion::kEo:
      return report.eo_disp;
    case Notion::kEod:
      return report.eod_disp;
    case Notion::kCp:
      return report.cp_disp;
  }
  return 0.0;
}

Dataset with_group_column(const Dataset& ds) {
  validate_dataset(ds);
  Dataset out = ds;
  out.d = ds.d + 1;
  out.features.assign(ds.n * out.d, 0.0);
  for (std::size_t s = 0; s < ds.n; ++s) {
    std::copy(ds.features.begin() + static_cast<std::ptrdiff_t>(s * ds.d),
              ds.features.begin() + static_cast<std::ptrdiff_t>((s + 1) * ds.d),
              out.features.begin() + static_cast<std::ptrdiff_t>(s * out.d));
    out.features[s * out.d + ds.d] = static_cast<double>(ds.groups[s]);
  }
  return out;
}

Predictor probability_predictor(const ModelParams& params) {
  if (params.dim == 0) throw DimensionError("predictor needs initialized parameters");
  return [params, buf = std::vector<double>(params.dim)](const double* x, int group) mutable {
    std::copy(x, x + params.dim - 1, buf.begin());
    buf[params.dim - 1] = static_cast<double>(group);
    return forward(params, buf.data());
  };
}

Predictor decision_predictor(const ModelParams& params) {
  const Predictor prob = probability_predictor(params);
  return [prob](const double* x, int group) { return prob(x, group) > 0.5 ? 1.0 : 0.0; };
}

RunResult fedfb_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config) {
  return run_rounds(train, eval_ds, config, LoopMode::kGlobalFair);
}

RunResult fedavg_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config) {
  return run_rounds(train, eval_ds, config, LoopMode::kPlainAvg);
}

RunResult lft_fedavg_run(const Dataset& train, const Dataset& eval_ds,
                         const ProtocolConfig& config) {
  return run_local_fair(train, eval_ds, config, true);
}

RunResult lft_ensemble_run(const Dataset& train, const Dataset& eval_ds,
                           const ProtocolConfig& config) {
  return run_local_fair(train, eval_ds, config, false);
}

RunResult cfl_run(const Dataset& train, const Dataset& eval_ds, const ProtocolConfig& config) {
  validate_dataset(train);
  Dataset pooled = train;
  pooled.clients.clear();
  pooled.n_clients = 1;
  return run_centralized(with_group_column(pooled), eval_ds, config);
}

RunResult run_method(Method m, const Dataset& train, const Dataset& eval_ds,
                     const ProtocolConfig& config) {
  switch (m) {
    case Method::kFedAvg:
      return fedavg_run(train, eval_ds, config);
    case Method::kFedFb:
      return fedfb_run(train, eval_ds, config);
    case Method::kLftFedAvg:
      return lft_fedavg_run(train, eval_ds, config);
    case Method::kLftEnsemble:
      return lft_ensemble_run(train, eval_ds, config);
    case Method::kCfl:
      return cfl_run(train, eval_ds, config);
  }
  throw InvalidSpecError("unknown method");
}

RunResult fedfb_run(const Dataset& ds, const ProtocolConfig& config) {
  return fedfb_run(ds, ds, config);
}

RunResult fedavg_run(const Dataset& ds, const ProtocolConfig& config) {
  return fedavg_run(ds, ds, config);
}

RunResult lft_fedavg_run(const Dataset& ds, const ProtocolConfig& config) {
  return lft_fedavg_run(ds, ds, config);
}

RunResult lft_ensemble_run(const Dataset& ds, const ProtocolConfig& config) {
  return lft_ensemble_run(ds, ds, config);
}

RunResult cfl_run(const Dataset& ds, const ProtocolConfig& config) {
  return cfl_run(ds, ds, config);
}

RunResult run_method(Method m, const Dataset& ds, const ProtocolConfig& config) {
  return run_method(m, ds, ds, config);
}

Predictor ensemble_predictor(const std::vector<ModelParams>& members) {
  if (members.empty()) throw InvalidSpecError("ensemble needs at least one member");
  for (const ModelParams& m : members) {
    if (m.kind != members.front().kind || m.dim != members.front().dim) {
      throw DimensionError("ensemble members must share one model shape");
    }
  }
  const std::vector<ModelParams> copy = members;
  const std::size_t dim = members.front().dim;
  return [copy, dim, buf = std::vector<double>(dim)](const double* x, int group) mutable {
    std::copy(x, x + dim - 1, buf.begin());
    buf[dim - 1] = static_cast<double>(group);
    double sum = 0.0;
    for (const ModelParams& m : copy) sum += forward(m, buf.data());
    return sum / static_cast<double>(copy.size());
  };
}

void write_round_log(const std::vector<RoundRecord>& log, std::size_t client_count,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerializationError("cannot open for writing: " + path);
  out << "round,client_count,lambda_json,outer_obj,accuracy,disparity,bits_sent\n";
  out.precision(17);
  for (const RoundRecord& rec : log) {
    const nlohmann::json lam = rec.lambda;
    out << rec.round << "," << client_count << ",\"" << lam.dump() << "\"," << rec.outer_obj
        << "," << rec.accuracy << "," << rec.disparity << "," << rec.bits_sent << "\n";
  }
  if (!out) throw SerializationError("short write: " + path);
}

}  // namespace fedfair
