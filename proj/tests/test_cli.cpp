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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/cli.hpp"
#include "fedfair/common.hpp"
#include "fedfair/model.hpp"

using namespace fedfair;
using namespace fedfair::cli;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on destruction.
struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& name) : root(fs::path("cli_scratch") / name) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() { fs::remove_all(root); }
  std::string dir(const std::string& sub) const { return (root / sub).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

const char* kTinyTrain = R"({
  "mode": "train",
  "dataset": {"kind": "synthetic", "n": 600, "split": "medium"},
  "method": "fedfb",
  "notion": "dp",
  "learning_rate": 0.01,
  "local_epochs": 2,
  "rounds": 3,
  "alpha": 0.2,
  "seeds": [0, 1]
})";

}  // namespace

TEST_CASE("config text parses, emits canonically, and round-trips") {
  const std::string text = R"({"mode": "train", "rounds": 4, "seeds": [7]})";
  const nlohmann::json parsed = parse_config_text(text);
  const std::string once = emit_config(parsed);
  CHECK(emit_config(parse_config_text(once)) == once);

  const TrainSpec spec = train_from_json(parsed);
  const nlohmann::json canonical = train_to_json(spec);
  CHECK(train_to_json(train_from_json(canonical)) == canonical);
  CHECK(spec.protocol.train.rounds == 4);
  CHECK(spec.seeds == std::vector<std::uint64_t>{7});

  CHECK_THROWS_AS(parse_config_text("not json"), ParseError);
  CHECK_THROWS_AS(parse_config_text(R"({"rounds": 4})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"([1, 2])"), ConfigError);
}

TEST_CASE("train config defaults match the published hyperparameters") {
  const TrainSpec spec = train_from_json(parse_config_text(R"({"mode": "train"})"));
  CHECK(spec.dataset.kind == "synthetic");
  CHECK(spec.dataset.n == 5000);
  CHECK(spec.dataset.label_rate == 0.6);
  CHECK(spec.dataset.split == "medium");
  CHECK(spec.method == Method::kFedFb);
  CHECK(spec.protocol.notion == Notion::kDp);
  CHECK(spec.protocol.lambda_period == 1);
  CHECK(spec.protocol.quantizer.bits == 0);
  CHECK(spec.protocol.model == ModelKind::kLogistic);
  CHECK(spec.protocol.train.learning_rate == 0.005);
  CHECK(spec.protocol.train.batch_size == 128);
  CHECK(spec.protocol.train.local_epochs == 30);
  CHECK(spec.protocol.train.rounds == 10);
  CHECK(spec.protocol.train.alpha == 0.1);
  CHECK(spec.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});

  const SweepSpec sweep = sweep_from_json(parse_config_text(R"({"mode": "sweep"})"));
  CHECK(sweep.lr_grid == std::vector<double>{0.001, 0.005, 0.01});
  CHECK(sweep.alpha_grid == std::vector<double>{0.001, 0.05, 0.08, 0.1, 0.2, 0.5, 1.0, 2.0});
  CHECK(sweep.holdout_ratio == 0.2);
}

TEST_CASE("config validation rejects unknown names and bad values") {
  CHECK_THROWS_AS(train_from_json(parse_config_text(R"({"mode": "train", "method": "x"})")),
                  InvalidSpecError);
  CHECK_THROWS_AS(train_from_json(parse_config_text(R"({"mode": "train", "notion": "x"})")),
                  ConfigError);
  CHECK_THROWS_AS(train_from_json(parse_config_text(R"({"mode": "train", "model": "x"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      train_from_json(parse_config_text(R"({"mode": "train", "seeds": []})")), ConfigError);
  CHECK_THROWS_AS(
      train_from_json(parse_config_text(R"({"mode": "train", "learning_rate": -1})")),
      ConfigError);
  CHECK_THROWS_AS(train_from_json(parse_config_text(
                      R"({"mode": "train", "dataset": {"split": "diagonal"}})")),
                  ConfigError);
  CHECK_THROWS_AS(
      analyze_from_json(parse_config_text(R"({"mode": "analyze", "clients": []})")),
      ConfigError);
  // A degenerate sensitive rate is unsupported, not merely invalid.
  CHECK_THROWS_AS(analyze_from_json(parse_config_text(
                      R"({"mode": "analyze",
                          "clients": [{"mu0": 0, "mu1": 0, "sigma0": 1, "sigma1": 1, "q": 0}]})")),
                  UnsupportedError);
}

TEST_CASE("cmd_analyze writes curves, delta, and the psi surface") {
  Scratch scratch("analyze");
  AnalyzeSpec spec = analyze_from_json(parse_config_text(R"({
    "mode": "analyze",
    "clients": [
      {"mu0": 3.0, "mu1": 5.0, "sigma0": 1.0, "sigma1": 1.0, "q": 0.5},
      {"mu0": 1.0, "mu1": -1.0, "sigma0": 1.0, "sigma1": 1.0, "q": 0.5}
    ],
    "eps_grid": [0.0, 0.1, 0.2],
    "lp_cells": 64,
    "psi_grid": 4
  })"));
  const std::string out = scratch.dir("run");
  const std::vector<std::string> files = cmd_analyze(spec, out);
  for (const std::string& f :
       {std::string("config.json"), std::string("curve_cfl.csv"),
        std::string("curve_lft_ensemble.csv"), std::string("curve_lft_fedavg.csv"),
        std::string("delta.csv"), std::string("psi_surface.csv")}) {
    CAPTURE(f);
    CHECK(std::find(files.begin(), files.end(), f) != files.end());
    CHECK(fs::exists(fs::path(out) / f));
  }
  const auto curve = lines_of(read_file(out + "/curve_cfl.csv"));
  CHECK(curve[0] == "method,eps,accuracy,dp_disp");
  CHECK(curve.size() == 4);  // header + one point per eps
  CHECK(split_csv_row(curve[1])[0] == "cfl");

  const auto delta = lines_of(read_file(out + "/delta.csv"));
  CHECK(delta.size() == 2);
  const auto fields = split_csv_row(delta[1]);
  REQUIRE(fields.size() == 8);
  const double delta_val = std::stod(fields[0]);
  const double c = std::stod(fields[1]);
  CHECK(delta_val >= 0.0);
  CHECK(c >= 0.0);

  const auto psi = lines_of(read_file(out + "/psi_surface.csv"));
  CHECK(psi[0] == "eps0,eps1,psi");
  CHECK(psi.size() == (c > 0.0 ? 1 + 4 * 4 : 2));
}

TEST_CASE("cmd_train emits logs, checkpoints, and the summary row") {
  Scratch scratch("train");
  const TrainSpec spec = train_from_json(parse_config_text(kTinyTrain));
  const std::string out = scratch.dir("run");
  cmd_train(spec, out);

  const auto summary = lines_of(read_file(out + "/summary.csv"));
  REQUIRE(summary.size() == 2);
  CHECK(summary[0] == "method,acc_mean,acc_std,disp_mean,disp_std,bits_total");
  const auto row = split_csv_row(summary[1]);
  REQUIRE(row.size() == 6);
  CHECK(row[0] == "fedfb");
  // rounds * clients * one DP statistic * 64 bits
  CHECK(row[5] == std::to_string(3 * 3 * 64));

  for (std::uint64_t s : {0, 1}) {
    const std::string log = out + "/rounds_seed" + std::to_string(s) + ".csv";
    const auto rows = lines_of(read_file(log));
    CHECK(rows.size() == 1 + spec.protocol.train.rounds);
    CHECK(rows[0] == "round,client_count,lambda_json,outer_obj,accuracy,disparity,bits_sent");
    const ModelParams params =
        load_params(out + "/params_seed" + std::to_string(s) + ".bin");
    // Two synthetic features plus the appended group column.
    CHECK(params.dim == 3);
  }
}

TEST_CASE("frozen-lambda federation summarizes like plain averaging") {
  Scratch scratch("frozen");
  nlohmann::json config = parse_config_text(kTinyTrain);
  config["lambda_period"] = 99;  // beyond the round count: weights never move
  const std::string fb_out = scratch.dir("fb");
  cmd_train(train_from_json(config), fb_out);
  config["method"] = "fedavg";
  const std::string avg_out = scratch.dir("avg");
  cmd_train(train_from_json(config), avg_out);

  const auto fb = split_csv_row(lines_of(read_file(fb_out + "/summary.csv"))[1]);
  const auto avg = split_csv_row(lines_of(read_file(avg_out + "/summary.csv"))[1]);
  for (std::size_t k : {1, 2, 3, 4}) CHECK(fb[k] == avg[k]);
  CHECK(avg[5] == "0");
  CHECK(fb[5] != "0");
}

TEST_CASE("identical configs reproduce every output byte for byte") {
  Scratch scratch("rerun");
  const TrainSpec spec = train_from_json(parse_config_text(kTinyTrain));
  const std::string a = scratch.dir("a");
  const std::string b = scratch.dir("b");
  const std::vector<std::string> files_a = cmd_train(spec, a);
  const std::vector<std::string> files_b = cmd_train(spec, b);
  REQUIRE(files_a == files_b);
  for (const std::string& f : files_a) {
    CAPTURE(f);
    CHECK(read_file(a + "/" + f) == read_file(b + "/" + f));
  }
}

TEST_CASE("cmd_sweep picks the highest-fairness alpha at the chosen rate") {
  Scratch scratch("sweep");
  const SweepSpec spec = sweep_from_json(parse_config_text(R"({
    "mode": "sweep",
    "dataset": {"kind": "synthetic", "n": 500, "split": "medium"},
    "method": "fedfb",
    "local_epochs": 2,
    "rounds": 3,
    "alpha_grid": [0.02, 0.4],
    "lr_grid": [0.005, 0.01],
    "holdout_ratio": 0.25,
    "seeds": [0, 1]
  })"));
  const std::string out = scratch.dir("run");
  cmd_sweep(spec, out);

  const auto cells = lines_of(read_file(out + "/cells.csv"));
  CHECK(cells[0] == "phase,learning_rate,alpha,value");
  CHECK(cells.size() == 1 + 2 + 2);  // lr rows then alpha rows

  const nlohmann::json picked = nlohmann::json::parse(read_file(out + "/choice.json"));
  const double chosen_alpha = picked.at("alpha").get<double>();
  const double chosen_lr = picked.at("learning_rate").get<double>();
  CHECK((chosen_alpha == 0.02 || chosen_alpha == 0.4));
  CHECK((chosen_lr == 0.005 || chosen_lr == 0.01));

  // The alpha rows of cells.csv must agree with the choice: the picked alpha
  // carries the smallest mean disparity.
  double best = 1e9;
  double best_alpha = -1.0;
  for (std::size_t k = 3; k < cells.size(); ++k) {
    const auto row = split_csv_row(cells[k]);
    REQUIRE(row[0] == "alpha");
    CHECK(std::stod(row[1]) == chosen_lr);
    if (std::stod(row[3]) < best) {
      best = std::stod(row[3]);
      best_alpha = std::stod(row[2]);
    }
  }
  CHECK(best_alpha == chosen_alpha);

  // The summary is the chosen cell retrained on the full training part and
  // scored on the test part, so it need not equal the validation value; it
  // must exist as one well-formed row for the swept method.
  const auto summary = lines_of(read_file(out + "/summary.csv"));
  REQUIRE(summary.size() == 2);
  const auto row = split_csv_row(summary[1]);
  REQUIRE(row.size() == 6);
  CHECK(row[0] == "fedfb");
  CHECK(std::stod(row[3]) >= 0.0);
}

TEST_CASE("cmd_report merges summaries sorted by method then eps") {
  Scratch scratch("report");
  const std::string header = "method,acc_mean,acc_std,disp_mean,disp_std,bits_total";
  const std::string r1 = scratch.dir("r1");
  const std::string r2 = scratch.dir("r2");
  const std::string r3 = scratch.dir("r3");
  for (const std::string& d : {r1, r2, r3}) fs::create_directories(d);
  write_file(r1 + "/summary.csv", header + "\nfedfb,0.7,0.01,0.05,0.002,1920\n");
  write_file(r1 + "/config.json", "{\"mode\": \"train\", \"eps\": 0.2}\n");
  write_file(r2 + "/summary.csv", header + "\ncfl,0.72,0.01,0.03,0.001,0\n");
  write_file(r3 + "/summary.csv", header + "\nfedfb,0.71,0.01,0.04,0.002,300\n");
  write_file(r3 + "/config.json", "{\"mode\": \"train\", \"eps\": 0.1}\n");

  const std::string out = scratch.dir("merged");
  cmd_report({r1, r2, r3}, out);
  const auto merged = lines_of(read_file(out + "/merged.csv"));
  REQUIRE(merged.size() == 4);
  CHECK(merged[0] == "method,eps,acc_mean,acc_std,disp_mean,disp_std,bits_total");
  CHECK(split_csv_row(merged[1])[0] == "cfl");
  CHECK(split_csv_row(merged[2])[0] == "fedfb");
  CHECK(std::stod(split_csv_row(merged[2])[1]) == 0.1);
  CHECK(std::stod(split_csv_row(merged[3])[1]) == 0.2);

  const auto scatter = lines_of(read_file(out + "/scatter.csv"));
  CHECK(scatter[0] == "method,disp_mean,acc_mean");
  CHECK(scatter.size() == 4);

  // Single run: pass-through of the row plus the eps column.
  const std::string solo = scratch.dir("solo");
  cmd_report({r2}, solo);
  const auto solo_rows = lines_of(read_file(solo + "/merged.csv"));
  REQUIRE(solo_rows.size() == 2);
  CHECK(solo_rows[1] == "cfl,0,0.72,0.01,0.03,0.001,0");

  CHECK_THROWS_AS(cmd_report({scratch.dir("missing")}, scratch.dir("x")),
                  MissingSummaryError);
  CHECK_THROWS_AS(cmd_report({}, scratch.dir("y")), ConfigError);
}

TEST_CASE("run() returns zero on success and one on failure") {
  Scratch scratch("exitcodes");
  write_file(scratch.dir("cfg.json"), kTinyTrain);
  const std::string out = scratch.dir("out");
  {
    const std::string cfg_flag = scratch.dir("cfg.json");
    const char* argv[] = {"fedfair", "train",      "--config", cfg_flag.c_str(),
                          "--out",   out.c_str(),  "--seeds",  "0,1",
                          "--quant-bits", "10"};
    CHECK(fedfair::cli::run(10, argv) == 0);
    // The quantizer override shows up in both the echoed config and the
    // bit accounting: 3 rounds * 3 clients * 1 stat * 10 bits.
    const nlohmann::json echoed = nlohmann::json::parse(read_file(out + "/config.json"));
    CHECK(echoed.at("quant_bits").get<int>() == 10);
    const auto row = split_csv_row(lines_of(read_file(out + "/summary.csv"))[1]);
    CHECK(row[5] == std::to_string(3 * 3 * 10));
  }
  {
    write_file(scratch.dir("bad.json"), R"({"mode": "analyze", "clients": []})");
    const std::string bad = scratch.dir("bad.json");
    const std::string out2 = scratch.dir("out2");
    const char* argv[] = {"fedfair", "analyze", "--config", bad.c_str(), "--out", out2.c_str()};
    CHECK(fedfair::cli::run(6, argv) == 1);
  }
  {
    const std::string out3 = scratch.dir("out3");
    const char* argv[] = {"fedfair", "report", "--out", out3.c_str(), "no_such_dir"};
    CHECK(fedfair::cli::run(5, argv) == 1);
  }
}
