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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/data.hpp"
#include "fedfair/federation.hpp"
#include "fedfair/metrics.hpp"
#include "fedfair/model.hpp"
#include "fedfair/server.hpp"

using namespace fedfair;

namespace {

Dataset small_benchmark(std::size_t n, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n = n;
  spec.seed = seed;
  return generate_synthetic(spec);
}

Dataset with_split(const Dataset& ds, const std::string& level, std::uint64_t seed) {
  return split_clients(ds, split_preset(level), seed);
}

// Concatenates `copies` clones of ds, one clone per client id.
Dataset identical_clients(const Dataset& ds, std::size_t copies) {
  Dataset out;
  out.d = ds.d;
  out.n_groups = ds.n_groups;
  out.n_clients = copies;
  for (std::size_t c = 0; c < copies; ++c) {
    out.features.insert(out.features.end(), ds.features.begin(), ds.features.end());
    out.labels.insert(out.labels.end(), ds.labels.begin(), ds.labels.end());
    out.groups.insert(out.groups.end(), ds.groups.begin(), ds.groups.end());
    out.clients.insert(out.clients.end(), ds.n, static_cast<int>(c));
  }
  out.n = out.labels.size();
  return out;
}

ProtocolConfig quick_config(Notion notion, std::size_t rounds, std::size_t epochs) {
  ProtocolConfig cfg;
  cfg.notion = notion;
  cfg.lambda_period = 1;
  cfg.model = ModelKind::kLogistic;
  cfg.train.learning_rate = 0.01;
  cfg.train.batch_size = 64;
  cfg.train.local_epochs = epochs;
  cfg.train.rounds = rounds;
  cfg.train.alpha = 0.1;
  cfg.train.seed = 11;
  return cfg;
}

bool same_theta(const ModelParams& a, const ModelParams& b) {
  if (a.theta.size() != b.theta.size()) return false;
  for (std::size_t j = 0; j < a.theta.size(); ++j) {
    if (a.theta[j] != b.theta[j]) return false;
  }
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("quantizer validation rejects bad settings") {
  CHECK_THROWS_AS(validate_quantizer(Quantizer{53, 0.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(validate_quantizer(Quantizer{-1, 0.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(validate_quantizer(Quantizer{8, 1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(validate_quantizer(Quantizer{8, 2.0, 0.0}), ConfigError);
  CHECK_NOTHROW(validate_quantizer(Quantizer{0, 0.0, 2.0}));
  CHECK_NOTHROW(validate_quantizer(Quantizer{52, -2.0, 2.0}));
}

TEST_CASE("quantize maps to the nearest level and clips to the range") {
  const Quantizer none{0, 0.0, 2.0};
  CHECK(quantize(none, 0.12345) == 0.12345);
  CHECK(quantize(none, -7.0) == -7.0);

  const Quantizer one_bit{1, 0.0, 1.0};
  CHECK(quantize(one_bit, 0.2) == 0.0);
  CHECK(quantize(one_bit, 0.9) == 1.0);
  CHECK(quantize(one_bit, -0.3) == 0.0);
  CHECK(quantize(one_bit, 1.7) == 1.0);

  const Quantizer ten{10, -2.0, 2.0};
  const double step = 4.0 / ((1 << 10) - 1);
  for (double v : {-1.993, -0.41, 0.0, 0.7772, 1.999}) {
    CHECK(std::fabs(quantize(ten, v) - v) <= step / 2 + 1e-15);
  }
}

TEST_CASE("payload_bits counts quantized or full-width doubles") {
  CHECK(payload_bits(Quantizer{0, 0.0, 2.0}, 3) == 192);
  CHECK(payload_bits(Quantizer{10, 0.0, 2.0}, 3) == 30);
  CHECK(payload_bits(Quantizer{1, 0.0, 2.0}, 5) == 5);
}

TEST_CASE("secagg_sum adds payloads and checks widths") {
  const Quantizer none{0, 0.0, 2.0};
  const std::vector<double> sum = secagg_sum({{0.2}, {0.3}, {0.5}}, none);
  REQUIRE(sum.size() == 1);
  CHECK(sum[0] == 1.0);

  const Quantizer one_bit{1, 0.0, 1.0};
  const std::vector<double> q = secagg_sum({{0.2}, {0.9}}, one_bit);
  CHECK(q[0] == 1.0);

  CHECK_THROWS_AS(secagg_sum({{0.2, 0.1}, {0.3}}, none), DimensionError);
  CHECK_THROWS_AS(secagg_sum({}, none), InvalidSpecError);
}

TEST_CASE("fedavg_aggregate weighs parameters by sample count") {
  RoundMessage a;
  a.params = zero_params(ModelKind::kLogistic, 1);
  a.params.theta = {0.0, 0.0};
  a.sample_count = 1;
  RoundMessage b;
  b.params = zero_params(ModelKind::kLogistic, 1);
  b.params.theta = {4.0, 4.0};
  b.sample_count = 3;
  const ModelParams out = fedavg_aggregate({a, b});
  CHECK(out.theta[0] == 3.0);
  CHECK(out.theta[1] == 3.0);

  RoundMessage wrong = b;
  wrong.params = zero_params(ModelKind::kLogistic, 2);
  CHECK_THROWS_AS(fedavg_aggregate({a, wrong}), DimensionError);
  RoundMessage empty = b;
  empty.sample_count = 0;
  CHECK_THROWS_AS(fedavg_aggregate({a, empty}), InvalidSpecError);
}

TEST_CASE("validate_protocol rejects bad cadence, training, and quantizer") {
  ProtocolConfig cfg = quick_config(Notion::kDp, 2, 1);
  CHECK_NOTHROW(validate_protocol(cfg));
  cfg.lambda_period = 0;
  CHECK_THROWS_AS(validate_protocol(cfg), ConfigError);
  cfg = quick_config(Notion::kDp, 2, 1);
  cfg.train.learning_rate = -1.0;
  CHECK_THROWS_AS(validate_protocol(cfg), ConfigError);
  cfg = quick_config(Notion::kDp, 2, 1);
  cfg.quantizer.bits = 60;
  CHECK_THROWS_AS(validate_protocol(cfg), ConfigError);
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::kFedAvg, Method::kFedFb, Method::kLftFedAvg, Method::kLftEnsemble,
                   Method::kCfl}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK_THROWS_AS(method_from_name("nope"), InvalidSpecError);
}

TEST_CASE("notion_disparity picks the matching column") {
  EvalReport r;
  r.dp_disp_multi = 0.1;
  r.eo_disp = 0.2;
  r.eod_disp = 0.3;
  r.cp_disp = 0.4;
  CHECK(notion_disparity(r, Notion::kDp) == 0.1);
  CHECK(notion_disparity(r, Notion::kEo) == 0.2);
  CHECK(notion_disparity(r, Notion::kEod) == 0.3);
  CHECK(notion_disparity(r, Notion::kCp) == 0.4);
}

TEST_CASE("single-client federation matches the centralized loop bit for bit") {
  const Dataset ds = small_benchmark(400, 7);
  for (Notion notion : {Notion::kDp, Notion::kEo, Notion::kEod}) {
    CAPTURE(notion_name(notion));
    const ProtocolConfig cfg = quick_config(notion, 6, 2);
    const RunResult fed = fedfb_run(ds, cfg);
    const RunResult cen = cfl_run(ds, cfg);
    REQUIRE(fed.log.size() == cen.log.size());
    for (std::size_t t = 0; t < fed.log.size(); ++t) {
      REQUIRE(fed.log[t].lambda.size() == cen.log[t].lambda.size());
      for (std::size_t j = 0; j < fed.log[t].lambda.size(); ++j) {
        CHECK(fed.log[t].lambda[j] == cen.log[t].lambda[j]);
      }
      REQUIRE(fed.log[t].stats.size() == cen.log[t].stats.size());
      for (std::size_t j = 0; j < fed.log[t].stats.size(); ++j) {
        CHECK(fed.log[t].stats[j] == cen.log[t].stats[j]);
      }
      CHECK(fed.log[t].accuracy == cen.log[t].accuracy);
      CHECK(fed.log[t].disparity == cen.log[t].disparity);
    }
    CHECK(same_theta(fed.params, cen.params));
  }
}

TEST_CASE("reconstructed statistics equal the pooled computation every round") {
  const Dataset ds = with_split(small_benchmark(600, 21), "medium", 3);
  const ProtocolConfig cfg = quick_config(Notion::kDp, 5, 1);
  const RunResult fed = fedfb_run(ds, cfg);
  const Dataset aug = with_group_column(ds);  // the view the clients train on
  const GroupCounts counts =
      count_groups(ds.labels, ds.groups, ds.clients, ds.n_groups, ds.n_clients);
  REQUIRE(fed.message_trace.size() == cfg.train.rounds);
  for (std::size_t t = 0; t < fed.message_trace.size(); ++t) {
    const std::vector<RoundMessage>& msgs = fed.message_trace[t];
    REQUIRE(msgs.size() == ds.n_clients);
    std::vector<double> loss(ds.n);
    for (std::size_t s = 0; s < ds.n; ++s) {
      const ModelParams& owner = msgs[static_cast<std::size_t>(ds.clients[s])].params;
      loss[s] = bce_loss(forward(owner, aug.features.data() + s * aug.d), ds.labels[s]);
    }
    const GroupLossReport report =
        compute_group_losses(loss, ds.labels, ds.groups, ds.clients, ds.n_groups, ds.n_clients);
    const FStatistics direct = compute_stats(Notion::kDp, report, counts);
    REQUIRE(fed.log[t].stats.size() == direct.values.size());
    for (std::size_t j = 0; j < direct.values.size(); ++j) {
      CHECK(std::fabs(fed.log[t].stats[j] - direct.values[j]) <= 1e-10);
    }
  }
}

TEST_CASE("lambda moves only on rounds divisible by the cadence") {
  const Dataset ds = with_split(small_benchmark(500, 3), "medium", 9);
  ProtocolConfig cfg = quick_config(Notion::kDp, 3, 1);
  cfg.lambda_period = 2;
  const RunResult fed = fedfb_run(ds, cfg);
  const GroupCounts counts =
      count_groups(ds.labels, ds.groups, ds.clients, ds.n_groups, ds.n_clients);
  const LambdaWeights init = init_lambda(Notion::kDp, counts);
  REQUIRE(fed.log.size() == 3);
  CHECK(fed.log[0].lambda == init.v);
  CHECK(fed.log[1].lambda != init.v);
  CHECK(fed.log[2].lambda == fed.log[1].lambda);

  cfg.lambda_period = 5;  // larger than the round count: frozen throughout
  const RunResult frozen = fedfb_run(ds, cfg);
  for (const RoundRecord& rec : frozen.log) CHECK(rec.lambda == init.v);
}

TEST_CASE("plain averaging equals federation with frozen weights") {
  const Dataset ds = with_split(small_benchmark(500, 5), "medium", 2);
  ProtocolConfig cfg = quick_config(Notion::kDp, 4, 1);
  cfg.lambda_period = cfg.train.rounds + 1;
  const RunResult frozen = fedfb_run(ds, cfg);
  const RunResult plain = fedavg_run(ds, cfg);
  CHECK(same_theta(frozen.params, plain.params));
  CHECK(plain.total_bits == 0);
  for (const auto& msgs : plain.message_trace) {
    for (const RoundMessage& m : msgs) CHECK(m.stats.empty());
  }
  // One statistic per round and client under demographic parity with two
  // groups, at 64 bits without quantization.
  CHECK(frozen.total_bits == cfg.train.rounds * ds.n_clients * 64);
}

TEST_CASE("the documented seed contract reproduces a federated run") {
  const Dataset ds = with_split(small_benchmark(400, 13), "medium", 17);
  ProtocolConfig cfg = quick_config(Notion::kDp, 3, 2);
  cfg.lambda_period = cfg.train.rounds + 1;
  const RunResult fed = fedavg_run(ds, cfg);

  const Dataset aug = with_group_column(ds);  // the view the clients train on
  std::vector<Dataset> parts;
  std::vector<GroupCounts> per_counts;
  for (std::size_t i = 0; i < ds.n_clients; ++i) {
    parts.push_back(client_view(aug, i));
    per_counts.push_back(
        count_groups(parts[i].labels, parts[i].groups, {}, ds.n_groups, 1));
  }
  const GroupCounts merged = merge_counts(per_counts);
  const CellWeights cw = sample_weights(init_lambda(Notion::kDp, merged), merged);
  ModelParams params = init_params(cfg.model, aug.d, cfg.train.seed);
  for (std::size_t t = 1; t <= cfg.train.rounds; ++t) {
    std::vector<RoundMessage> msgs(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::vector<double> w(parts[i].n);
      for (std::size_t s = 0; s < parts[i].n; ++s) {
        w[s] = weight_for(cw, parts[i].labels[s], parts[i].groups[s], static_cast<int>(i));
      }
      TrainConfig local = cfg.train;
      local.seed = mix_seed(cfg.train.seed, t, i);
      msgs[i].params = sgd_train(params, parts[i].features, parts[i].labels, w, local);
      msgs[i].sample_count = static_cast<std::int64_t>(parts[i].n);
    }
    params = fedavg_aggregate(msgs);
  }
  CHECK(same_theta(fed.params, params));
}

TEST_CASE("client parity with frozen weights reduces to plain averaging") {
  const Dataset ds = with_split(small_benchmark(400, 19), "low", 23);
  ProtocolConfig cfg = quick_config(Notion::kCp, 3, 1);
  cfg.lambda_period = cfg.train.rounds + 1;
  const RunResult cp = fedfb_run(ds, cfg);
  // Frozen client-parity weights are identically one, so the parameter
  // trajectory must match plain averaging up to the weight arithmetic.
  const RunResult plain = fedavg_run(ds, cfg);
  REQUIRE(cp.params.theta.size() == plain.params.theta.size());
  for (std::size_t j = 0; j < cp.params.theta.size(); ++j) {
    CHECK(cp.params.theta[j] == doctest::Approx(plain.params.theta[j]).epsilon(1e-9));
  }
}

TEST_CASE("local fair training never ships statistics") {
  const Dataset ds = with_split(small_benchmark(600, 29), "medium", 31);
  const ProtocolConfig cfg = quick_config(Notion::kDp, 4, 2);
  const RunResult lft = lft_fedavg_run(ds, cfg);
  CHECK(lft.total_bits == 0);
  for (const RoundRecord& rec : lft.log) {
    CHECK(rec.lambda.empty());
    CHECK(rec.bits_sent == 0);
  }
  for (const auto& msgs : lft.message_trace) {
    for (const RoundMessage& m : msgs) CHECK(m.stats.empty());
  }
  REQUIRE(lft.client_lambdas.size() == ds.n_clients);
  // Each client moved its own weights away from initialization.
  for (std::size_t i = 0; i < ds.n_clients; ++i) {
    const Dataset part = client_view(ds, i);
    const GroupCounts c = count_groups(part.labels, part.groups, {}, ds.n_groups, 1);
    CHECK(lft.client_lambdas[i].v != init_lambda(Notion::kDp, c).v);
  }
}

TEST_CASE("identical clients give an ensemble equal to any member") {
  const Dataset base = small_benchmark(300, 37);
  const Dataset ds3 = identical_clients(base, 3);
  const ProtocolConfig cfg = quick_config(Notion::kDp, 4, 2);
  const RunResult ens = lft_ensemble_run(ds3, cfg);
  REQUIRE(ens.members.size() == 3);
  CHECK(same_theta(ens.members[0], ens.members[1]));
  CHECK(same_theta(ens.members[0], ens.members[2]));
  // The mean probability over identical members is any one member's output.
  const EvalReport solo = evaluate(probability_predictor(ens.members[0]), ds3);
  CHECK(ens.log.back().accuracy == doctest::Approx(solo.accuracy).epsilon(1e-12));
  CHECK(ens.log.back().disparity ==
        doctest::Approx(solo.dp_disp_multi).epsilon(1e-9).scale(1.0));
}

TEST_CASE("identical clients keep local and global fairness in step") {
  const Dataset base = small_benchmark(500, 41);
  const Dataset ds3 = identical_clients(base, 3);
  ProtocolConfig cfg = quick_config(Notion::kDp, 8, 3);
  cfg.train.batch_size = 128;
  const RunResult fb = fedfb_run(ds3, cfg);
  const RunResult lft = lft_fedavg_run(ds3, cfg);
  CHECK(std::fabs(fb.log.back().disparity - lft.log.back().disparity) <= 0.02);
}

TEST_CASE("sharing statistics reduces disparity against plain averaging") {
  const Dataset ds = with_split(small_benchmark(2000, 43), "medium", 47);
  ProtocolConfig cfg = quick_config(Notion::kDp, 10, 5);
  cfg.train.batch_size = 128;
  cfg.train.alpha = 0.5;
  const RunResult fb = fedfb_run(ds, cfg);
  const RunResult plain = fedavg_run(ds, cfg);
  CHECK(fb.log.back().disparity < plain.log.back().disparity - 0.1);
  CHECK(fb.log.back().outer_obj < plain.log.back().outer_obj);
}

TEST_CASE("quantization stays within half a step per client on round one") {
  const Dataset ds = with_split(small_benchmark(600, 53), "medium", 59);
  ProtocolConfig exact_cfg = quick_config(Notion::kDp, 1, 1);
  ProtocolConfig coarse_cfg = exact_cfg;
  coarse_cfg.quantizer = Quantizer{10, -2.0, 2.0};
  const RunResult exact = fedfb_run(ds, exact_cfg);
  const RunResult coarse = fedfb_run(ds, coarse_cfg);
  const double step = 4.0 / ((1 << 10) - 1);
  REQUIRE(exact.log[0].stats.size() == coarse.log[0].stats.size());
  for (std::size_t j = 0; j < exact.log[0].stats.size(); ++j) {
    CHECK(std::fabs(exact.log[0].stats[j] - coarse.log[0].stats[j]) <=
          ds.n_clients * step / 2 + 1e-12);
  }
  CHECK(coarse.total_bits == 1 * ds.n_clients * 1 * 10);
}

TEST_CASE("runs fail fast when a notion's required cells are missing") {
  // Group 1 exists but never with label 1.
  Dataset ds;
  ds.d = 1;
  ds.n_groups = 2;
  ds.n_clients = 2;
  auto add = [&ds](int y, int a, int c) {
    ds.features.push_back(static_cast<double>(ds.labels.size()));
    ds.labels.push_back(y);
    ds.groups.push_back(a);
    ds.clients.push_back(c);
  };
  for (int r = 0; r < 6; ++r) add(r % 2, 0, r % 2);
  for (int r = 0; r < 6; ++r) add(0, 1, r % 2);
  ds.n = ds.labels.size();
  const ProtocolConfig cfg = quick_config(Notion::kEo, 1, 1);
  CHECK_THROWS_AS(fedfb_run(ds, cfg), MissingGroupError);
  ProtocolConfig eod = cfg;
  eod.notion = Notion::kEod;
  CHECK_THROWS_AS(fedfb_run(ds, eod), MissingGroupError);

  // An empty client fails regardless of the notion.
  Dataset gap = ds;
  gap.n_clients = 3;
  const ProtocolConfig dp = quick_config(Notion::kDp, 1, 1);
  CHECK_THROWS_AS(fedfb_run(gap, dp), EmptyClientError);
}

TEST_CASE("ensemble_predictor validates and averages the member outputs") {
  CHECK_THROWS_AS(ensemble_predictor({}), InvalidSpecError);
  ModelParams a = zero_params(ModelKind::kLogistic, 1);
  ModelParams b = zero_params(ModelKind::kLogistic, 2);
  CHECK_THROWS_AS(ensemble_predictor({a, b}), DimensionError);

  // Members of input width 2 see [x, group]. `flat` outputs exactly 0.5,
  // `up` a constant sigmoid(2), `grp` the group-dependent sigmoid(4a - 2).
  ModelParams flat = zero_params(ModelKind::kLogistic, 2);
  ModelParams up = flat;
  up.theta = {0.0, 0.0, 2.0};
  ModelParams grp = flat;
  grp.theta = {0.0, 4.0, -2.0};
  const Predictor pred = ensemble_predictor({flat, up, grp});
  const double x = 0.0;
  const double s2 = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(pred(&x, 0) == doctest::Approx((0.5 + s2 + (1.0 - s2)) / 3.0).epsilon(1e-12));
  CHECK(pred(&x, 1) == doctest::Approx((0.5 + s2 + s2) / 3.0).epsilon(1e-12));
}

TEST_CASE("round log CSV has the documented header and one line per round") {
  const Dataset ds = with_split(small_benchmark(300, 61), "low", 67);
  const ProtocolConfig cfg = quick_config(Notion::kDp, 3, 1);
  const RunResult fed = fedfb_run(ds, cfg);
  const std::string path = "round_log_test.csv";
  write_round_log(fed.log, ds.n_clients, path);
  const std::string text = read_file(path);
  std::remove(path.c_str());
  std::istringstream lines(text);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "round,client_count,lambda_json,outer_obj,accuracy,disparity,bits_sent");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.find(",\"[") != std::string::npos);
    CHECK(line.substr(0, 2) == std::to_string(rows) + ",");
  }
  CHECK(rows == cfg.train.rounds);
}

TEST_CASE("server sources never touch raw datasets") {
  for (const std::string rel : {"/core/include/fedfair/server.hpp", "/core/src/server.cpp"}) {
    const std::string text = read_file(FEDFAIR_SOURCE_DIR + rel);
    CAPTURE(rel);
    CHECK(text.find("data.hpp") == std::string::npos);
    CHECK(text.find("Dataset") == std::string::npos);
  }
}
