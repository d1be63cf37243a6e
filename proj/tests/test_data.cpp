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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/data.hpp"

using namespace fedfair;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// Small hand-assignable dataset: group 0 has `n0` samples, group 1 has `n1`.
Dataset toy_dataset(std::size_t n0, std::size_t n1) {
  Dataset ds;
  ds.n = n0 + n1;
  ds.d = 1;
  ds.n_groups = 2;
  ds.n_clients = 1;
  for (std::size_t i = 0; i < ds.n; ++i) {
    ds.features.push_back(static_cast<double>(i));
    ds.labels.push_back(static_cast<int>(i % 2));
    ds.groups.push_back(i < n0 ? 0 : 1);
  }
  return ds;
}

const char* kToyCsv =
    "age,city,label,sex\n"
    "20,paris,y,m\n"
    "30,rome,n,f\n"
    "40,paris,y,f\n";

CsvSchema toy_schema() {
  CsvSchema s;
  s.label_col = "label";
  s.sensitive_col = "sex";
  s.numeric_cols = {"age"};
  s.categorical_cols = {"city"};
  return s;
}

}  // namespace

TEST_CASE("synthetic generator hits the configured label rate") {
  SyntheticSpec spec;
  spec.seed = 7;
  const Dataset ds = generate_synthetic(spec);
  CHECK(ds.n == 5000);
  CHECK(ds.d == 2);
  double rate = 0.0;
  for (int y : ds.labels) rate += y;
  rate /= static_cast<double>(ds.n);
  CHECK(std::fabs(rate - 0.6) <= 0.02);
}

TEST_CASE("the density-ratio rule ties the sensitive attribute to the label") {
  SyntheticSpec spec;
  spec.seed = 11;
  const Dataset ds = generate_synthetic(spec);
  double a1_y1 = 0.0, n_y1 = 0.0, a1_y0 = 0.0, n_y0 = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.labels[i] == 1) {
      n_y1 += 1.0;
      a1_y1 += ds.groups[i];
    } else {
      n_y0 += 1.0;
      a1_y0 += ds.groups[i];
    }
  }
  CHECK(a1_y1 / n_y1 > a1_y0 / n_y0);
}

TEST_CASE("synthetic class-conditional means match the configured centers") {
  SyntheticSpec spec;
  spec.seed = 23;
  const Dataset ds = generate_synthetic(spec);
  double m0[2] = {0, 0}, m1[2] = {0, 0};
  double n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.labels[i] == 1) {
      n1 += 1;
      m1[0] += ds.features[2 * i];
      m1[1] += ds.features[2 * i + 1];
    } else {
      n0 += 1;
      m0[0] += ds.features[2 * i];
      m0[1] += ds.features[2 * i + 1];
    }
  }
  const double sd0[2] = {std::sqrt(10.0), std::sqrt(3.0)};
  const double sd1[2] = {std::sqrt(5.0), std::sqrt(5.0)};
  for (int j = 0; j < 2; ++j) {
    CHECK(std::fabs(m0[j] / n0 - (-2.0)) <= 3.0 * sd0[j] / std::sqrt(n0));
    CHECK(std::fabs(m1[j] / n1 - 2.0) <= 3.0 * sd1[j] / std::sqrt(n1));
  }
}

TEST_CASE("the same seed reproduces the dataset exactly") {
  SyntheticSpec spec;
  spec.seed = 42;
  spec.n = 400;
  const Dataset a = generate_synthetic(spec);
  const Dataset b = generate_synthetic(spec);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.groups == b.groups);
  spec.seed = 43;
  const Dataset c = generate_synthetic(spec);
  CHECK(a.features != c.features);
}

TEST_CASE("covariance validation rejects non-SPD and asymmetric input") {
  SyntheticSpec spec;
  spec.class0.cov = {1.0, 2.0, 2.0, 1.0};  // det < 0
  CHECK_THROWS_AS(generate_synthetic(spec), CovarianceError);
  spec.class0.cov = {1.0, 0.5, 0.4, 1.0};  // asymmetric
  CHECK_THROWS_AS(generate_synthetic(spec), CovarianceError);
  spec.class0.cov = {-1.0, 0.0, 0.0, 1.0};  // negative variance
  CHECK_THROWS_AS(generate_synthetic(spec), CovarianceError);
}

TEST_CASE("single-client split assigns everything to client zero") {
  const Dataset ds = toy_dataset(4, 4);
  SplitSpec one;
  one.proportions = {{1.0}, {1.0}};
  const Dataset out = split_clients(ds, one, 3);
  CHECK(out.n_clients == 1);
  for (int c : out.clients) CHECK(c == 0);
}

TEST_CASE("medium split matches its per-client group targets within one") {
  const Dataset ds = toy_dataset(1000, 1000);
  const Dataset out = split_clients(ds, split_preset("medium"), 17);
  std::vector<std::vector<int>> count(2, std::vector<int>(3, 0));
  for (std::size_t i = 0; i < out.n; ++i) count[out.groups[i]][out.clients[i]] += 1;
  const int want0[3] = {500, 300, 200};
  const int want1[3] = {200, 400, 400};
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(count[0][j] - want0[j]) <= 1);
    CHECK(std::abs(count[1][j] - want1[j]) <= 1);
  }
  // Conservation: the partition covers every sample exactly once.
  CHECK(count[0][0] + count[0][1] + count[0][2] == 1000);
  CHECK(count[1][0] + count[1][1] + count[1][2] == 1000);
  CHECK(out.features == ds.features);
  CHECK(out.labels == ds.labels);
}

TEST_CASE("low split keeps per-client group ratios near the global ratio") {
  const Dataset ds = toy_dataset(1200, 800);  // global P(a=1) = 0.4
  const Dataset out = split_clients(ds, split_preset("low"), 5);
  for (int j = 0; j < 3; ++j) {
    double n = 0.0, a1 = 0.0;
    for (std::size_t i = 0; i < out.n; ++i) {
      if (out.clients[i] == j) {
        n += 1.0;
        a1 += out.groups[i];
      }
    }
    CHECK(std::fabs(a1 / n - 0.4) <= 0.02);
  }
}

TEST_CASE("a client that would receive nothing raises EmptyClientError") {
  const Dataset ds = toy_dataset(5, 5);
  SplitSpec starve;
  starve.proportions = {{1.0, 0.0}, {1.0, 0.0}};
  CHECK_THROWS_AS(split_clients(ds, starve, 1), EmptyClientError);
}

TEST_CASE("split specs are validated") {
  const Dataset ds = toy_dataset(5, 5);
  SplitSpec bad;
  bad.proportions = {{0.5, 0.4}, {0.5, 0.5}};  // first row sums to 0.9
  CHECK_THROWS_AS(split_clients(ds, bad, 1), InvalidSpecError);
  bad.proportions = {{0.5, 0.5}};  // one row for two groups
  CHECK_THROWS_AS(split_clients(ds, bad, 1), InvalidSpecError);
  CHECK_THROWS_AS(split_preset("extreme"), InvalidSpecError);
}

TEST_CASE("client_view extracts a standalone per-client dataset") {
  const Dataset ds = toy_dataset(6, 6);
  const Dataset out = split_clients(ds, split_preset("low"), 9);
  std::size_t total = 0;
  for (std::size_t c = 0; c < out.n_clients; ++c) {
    const Dataset part = client_view(out, c);
    CHECK(part.n_clients == 1);
    CHECK(part.d == ds.d);
    total += part.n;
  }
  CHECK(total == ds.n);
  CHECK_THROWS_AS(client_view(ds, 0), InvalidSpecError);  // no assignment yet
}

TEST_CASE("train/test split cuts 10 samples into 7 and 3") {
  const Dataset ds = toy_dataset(5, 5);
  const auto [train, test] = train_test_split(ds, 0.7, 21);
  CHECK(train.n == 7);
  CHECK(test.n == 3);
  const auto [train2, test2] = train_test_split(ds, 0.7, 21);
  CHECK(train.features == train2.features);
  CHECK(test.labels == test2.labels);
  // Both sides kept both groups.
  for (const Dataset* part : {&train, &test}) {
    bool has0 = false, has1 = false;
    for (int g : part->groups) (g == 0 ? has0 : has1) = true;
    CHECK(has0);
    CHECK(has1);
  }
}

TEST_CASE("a one-sample minority group cannot be split and errors out") {
  const Dataset ds = toy_dataset(9, 1);
  CHECK_THROWS_AS(train_test_split(ds, 0.7, 3), DegenerateSplitError);
}

TEST_CASE("ratio bounds are enforced") {
  const Dataset ds = toy_dataset(5, 5);
  CHECK_THROWS_AS(train_test_split(ds, 0.0, 1), InvalidSpecError);
  CHECK_THROWS_AS(train_test_split(ds, 1.0, 1), InvalidSpecError);
}

TEST_CASE("toy CSV ingests with the documented one-hot layout") {
  const std::string path = "toy_ingest.csv";
  write_file(path, kToyCsv);
  const IngestResult r = load_csv(path, toy_schema());
  std::remove(path.c_str());
  const Dataset& ds = r.dataset;
  CHECK(ds.n == 3);
  CHECK(ds.d == 3);  // age, city=paris, city=rome
  CHECK(r.manifest.feature_names ==
        std::vector<std::string>{"age", "city=paris", "city=rome"});
  // Ages 20/30/40: mean 30, population std sqrt(200/3).
  const double z = 1.2247448713915890;
  CHECK(ds.features[0] == doctest::Approx(-z).epsilon(1e-14));
  CHECK(ds.features[1] == 1.0);
  CHECK(ds.features[2] == 0.0);
  CHECK(ds.features[3] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(ds.features[4] == 0.0);
  CHECK(ds.features[5] == 1.0);
  CHECK(ds.features[6] == doctest::Approx(z).epsilon(1e-14));
  // Sorted value maps: labels n->0, y->1; sex f->0, m->1.
  CHECK(ds.labels == std::vector<int>{1, 0, 1});
  CHECK(ds.groups == std::vector<int>{1, 0, 0});
}

TEST_CASE("a constant numeric column standardizes to zeros") {
  const std::string path = "toy_const.csv";
  write_file(path,
             "v,label,sex\n"
             "5,y,m\n"
             "5,n,f\n"
             "5,y,f\n");
  CsvSchema s;
  s.label_col = "label";
  s.sensitive_col = "sex";
  s.numeric_cols = {"v"};
  const IngestResult r = load_csv(path, s);
  std::remove(path.c_str());
  for (double v : r.dataset.features) CHECK(v == 0.0);
  CHECK(r.manifest.numeric_std.at("v") == 1e-12);
}

TEST_CASE("row order does not change the fitted transform") {
  const std::string a = "toy_order_a.csv";
  const std::string b = "toy_order_b.csv";
  write_file(a, kToyCsv);
  write_file(b,
             "age,city,label,sex\n"
             "40,paris,y,f\n"
             "20,paris,y,m\n"
             "30,rome,n,f\n");
  const IngestResult ra = load_csv(a, toy_schema());
  const IngestResult rb = load_csv(b, toy_schema());
  std::remove(a.c_str());
  std::remove(b.c_str());
  CHECK(ra.manifest.feature_names == rb.manifest.feature_names);
  CHECK(ra.manifest.numeric_mean.at("age") ==
        doctest::Approx(rb.manifest.numeric_mean.at("age")).epsilon(1e-14));
  // Compare rows sorted by the age feature.
  auto sorted_rows = [](const Dataset& ds) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ds.n; ++i) {
      std::vector<double> row(ds.features.begin() + i * ds.d,
                              ds.features.begin() + (i + 1) * ds.d);
      row.push_back(ds.labels[i]);
      row.push_back(ds.groups[i]);
      rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  const auto rows_a = sorted_rows(ra.dataset);
  const auto rows_b = sorted_rows(rb.dataset);
  REQUIRE(rows_a.size() == rows_b.size());
  for (std::size_t i = 0; i < rows_a.size(); ++i) {
    for (std::size_t k = 0; k < rows_a[i].size(); ++k) {
      CHECK(rows_a[i][k] == doctest::Approx(rows_b[i][k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("ingestion is deterministic for identical file and schema") {
  const std::string path = "toy_det.csv";
  write_file(path, kToyCsv);
  const IngestResult a = load_csv(path, toy_schema());
  const IngestResult b = load_csv(path, toy_schema());
  std::remove(path.c_str());
  CHECK(a.dataset.features == b.dataset.features);
  CHECK(a.dataset.labels == b.dataset.labels);
  CHECK(manifest_to_json(a.manifest) == manifest_to_json(b.manifest));
}

TEST_CASE("parse errors carry record and column context") {
  const std::string path = "toy_bad.csv";
  write_file(path,
             "age,city,label,sex\n"
             "20,paris,y,m\n"
             "oops,rome,n,f\n");
  try {
    load_csv(path, toy_schema());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("record 3") != std::string::npos);
    CHECK(msg.find("age") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("missing schema columns and ragged rows are rejected") {
  const std::string path = "toy_missing.csv";
  write_file(path, kToyCsv);
  CsvSchema s = toy_schema();
  s.numeric_cols = {"height"};
  CHECK_THROWS_AS(load_csv(path, s), ParseError);
  std::remove(path.c_str());
  write_file(path,
             "age,city,label,sex\n"
             "20,paris,y\n");
  CHECK_THROWS_AS(load_csv(path, toy_schema()), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("quoted fields with commas and escaped quotes parse") {
  const std::string path = "toy_quoted.csv";
  write_file(path,
             "age,city,label,sex\n"
             "20,\"T\"\"own, Big\",y,m\n"
             "30,rome,n,f\n");
  const IngestResult r = load_csv(path, toy_schema());
  std::remove(path.c_str());
  CHECK(r.manifest.categories.at("city") ==
        std::vector<std::string>{"T\"own, Big", "rome"});
}

TEST_CASE("applying a manifest to unseen categories raises UnknownCategoryError") {
  const std::string train_path = "toy_train.csv";
  const std::string infer_path = "toy_infer.csv";
  write_file(train_path, kToyCsv);
  const IngestResult fit = load_csv(train_path, toy_schema());
  write_file(infer_path,
             "age,city,label,sex\n"
             "25,oslo,y,m\n"
             "35,rome,n,f\n");
  CHECK_THROWS_AS(load_csv(infer_path, toy_schema(), fit.manifest), UnknownCategoryError);
  // Known categories go through and reuse the fitted statistics.
  write_file(infer_path,
             "age,city,label,sex\n"
             "30,rome,y,m\n"
             "30,paris,n,f\n");
  const Dataset mapped = load_csv(infer_path, toy_schema(), fit.manifest);
  CHECK(mapped.features[0] == doctest::Approx(0.0).epsilon(1e-14));  // (30-30)/std
  std::remove(train_path.c_str());
  std::remove(infer_path.c_str());
}

TEST_CASE("manifests round-trip through JSON") {
  const std::string path = "toy_manifest_src.csv";
  write_file(path, kToyCsv);
  const IngestResult r = load_csv(path, toy_schema());
  std::remove(path.c_str());
  const std::string json_path = "toy_manifest.json";
  save_manifest(r.manifest, json_path);
  const DataManifest back = load_manifest(json_path);
  std::remove(json_path.c_str());
  CHECK(manifest_to_json(back) == manifest_to_json(r.manifest));
  CHECK_THROWS_AS(manifest_from_json("{broken"), ParseError);
  CHECK_THROWS_AS(manifest_from_json("{}"), ParseError);
}

TEST_CASE("generated data exports to CSV and re-ingests") {
  SyntheticSpec spec;
  spec.n = 120;
  spec.seed = 3;
  Dataset ds = generate_synthetic(spec);
  ds = split_clients(ds, split_preset("medium"), 4);
  const std::string path = "toy_export.csv";
  save_csv(ds, path);
  CsvSchema s;
  s.label_col = "label";
  s.sensitive_col = "sensitive";
  s.client_col = "client";
  s.numeric_cols = {"x0", "x1"};
  const IngestResult r = load_csv(path, s);
  std::remove(path.c_str());
  CHECK(r.dataset.n == ds.n);
  CHECK(r.dataset.labels == ds.labels);
  CHECK(r.dataset.groups == ds.groups);
  CHECK(r.dataset.clients == ds.clients);
  CHECK(r.dataset.n_clients == 3);
}
