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
#ifndef FEDFAIR_DATA_HPP_
#define FEDFAIR_DATA_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair {

// In-memory dataset: row-major feature matrix plus 0/1 labels, sensitive
// group ids in [0, n_groups), and optional client ids in [0, n_clients).
// An empty `clients` vector means the data is not partitioned yet.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<int> groups;
  std::vector<int> clients;
  std::size_t n_groups = 0;
  std::size_t n_clients = 0;
};

// Throws if sizes disagree, ids are out of range, labels are not 0/1, or
// fewer than two sensitive groups are present.
void validate_dataset(const Dataset& ds);

// Rows of `ds` belonging to client i, as a standalone single-client dataset.
Dataset client_view(const Dataset& ds, std::size_t client);

// Two-dimensional Gaussian for one label class.
struct GaussianClass {
  std::array<double, 2> mean{};
  std::array<double, 4> cov{};  // row-major 2x2
};

// Generator for the biased two-group benchmark: labels are Bernoulli, the
// two feature coordinates follow class-conditional Gaussians, and the
// sensitive attribute is drawn with probability equal to the class-1 density
// share at the sampled point, which ties group membership to the label.
struct SyntheticSpec {
  std::size_t n = 5000;
  double label_rate = 0.6;
  GaussianClass class0{{-2.0, -2.0}, {10.0, 1.0, 1.0, 3.0}};
  GaussianClass class1{{2.0, 2.0}, {5.0, 1.0, 1.0, 5.0}};
  std::uint64_t seed = 0;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// Per-group rows of per-client proportions; each row sums to one.
struct SplitSpec {
  std::vector<std::vector<double>> proportions;
};

// The three built-in heterogeneity levels: "low", "medium", "high".
SplitSpec split_preset(const std::string& level);

// Assigns every sample to a client by cutting a seeded within-group shuffle
// at the cumulative proportions. Per-client group counts match the targets
// within one sample.
Dataset split_clients(const Dataset& ds, const SplitSpec& split, std::uint64_t seed);

// Seeded shuffle-and-cut split that keeps every sensitive group represented
// on both sides (up to 100 redraws, then DegenerateSplitError).
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double ratio, std::uint64_t seed);

// Column roles for CSV ingestion. client_col may be empty (no partition).
struct CsvSchema {
  std::string label_col;
  std::string sensitive_col;
  std::string client_col;
  std::vector<std::string> numeric_cols;
  std::vector<std::string> categorical_cols;
};

// Everything needed to map future files into the same feature space:
// standardization statistics, category vocabularies in the exact one-hot
// order, and the value-to-id mappings used for labels, groups, and clients.
struct DataManifest {
  CsvSchema schema;
  std::vector<std::string> feature_names;
  std::map<std::string, double> numeric_mean;
  std::map<std::string, double> numeric_std;  // floored at 1e-12
  std::map<std::string, std::vector<std::string>> categories;
  std::vector<std::string> label_values;      // index = mapped id
  std::vector<std::string> sensitive_values;  // index = group id
  std::vector<std::string> client_values;     // index = client id
};

struct IngestResult {
  Dataset dataset;
  DataManifest manifest;
};

// Fits the manifest on the file contents (vocabularies from the observed
// values, z-scoring from this file's statistics) and returns both.
IngestResult load_csv(const std::string& path, const CsvSchema& schema);

// Maps a file through an existing manifest. Unseen categorical, label,
// sensitive, or client values raise UnknownCategoryError.
Dataset load_csv(const std::string& path, const CsvSchema& schema, const DataManifest& manifest);

// Writes features as x0..x{d-1} plus label/sensitive (and client when
// assigned) so generated data round-trips through the CSV path.
void save_csv(const Dataset& ds, const std::string& path);

std::string manifest_to_json(const DataManifest& manifest);
DataManifest manifest_from_json(const std::string& text);
void save_manifest(const DataManifest& manifest, const std::string& path);
DataManifest load_manifest(const std::string& path);

}  // namespace fedfair

#endif  // FEDFAIR_DATA_HPP_
