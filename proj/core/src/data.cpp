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
#include "fedfair/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fedfair {
namespace {

constexpr double kStdFloor = 1e-12;
constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Chol2 {
  double l11, l21, l22;
};

// Cholesky factor of a 2x2 covariance; rejects asymmetric or non-SPD input.
Chol2 factor_cov(const std::array<double, 4>& cov) {
  if (cov[1] != cov[2]) throw CovarianceError("covariance must be symmetric");
  const double det = cov[0] * cov[3] - cov[1] * cov[2];
  if (!(cov[0] > 0.0) || !(det > 0.0)) {
    throw CovarianceError("covariance must be positive-definite");
  }
  Chol2 ch;
  ch.l11 = std::sqrt(cov[0]);
  ch.l21 = cov[1] / ch.l11;
  ch.l22 = std::sqrt(cov[3] - ch.l21 * ch.l21);
  return ch;
}

double gauss2_pdf(double x0, double x1, const GaussianClass& g) {
  const double det = g.cov[0] * g.cov[3] - g.cov[1] * g.cov[2];
  const double u0 = x0 - g.mean[0];
  const double u1 = x1 - g.mean[1];
  const double quad = (g.cov[3] * u0 * u0 - 2.0 * g.cov[1] * u0 * u1 + g.cov[0] * u1 * u1) / det;
  return std::exp(-0.5 * quad) / (kTwoPi * std::sqrt(det));
}

// --- CSV parsing (RFC-4180: quoted fields may hold commas, doubled quotes,
// and newlines; records end at an unquoted newline) ---

std::vector<std::vector<std::string>> parse_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t i = 0;
  auto end_field = [&]() {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&]() {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !field_was_quoted) {
      in_quotes = true;
      field_was_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_record();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  if (in_quotes) {
    throw ParseError("unterminated quote at end of " + path);
  }
  if (!field.empty() || !record.empty()) end_record();
  if (records.empty()) throw ParseError("empty file: " + path);
  return records;
}

std::string cell_context(std::size_t record, const std::string& column) {
  return " (record " + std::to_string(record + 1) + ", column " + column + ")";
}

double parse_number(const std::string& cell, std::size_t record, const std::string& column) {
  if (cell.empty()) throw ParseError("empty cell" + cell_context(record, column));
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + cell.size() || !std::isfinite(v)) {
    throw ParseError("not a finite number: '" + cell + "'" + cell_context(record, column));
  }
  return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column: " + name);
  return static_cast<std::size_t>(it - header.begin());
}

int lookup_id(const std::vector<std::string>& vocab, const std::string& value,
              const std::string& column, std::size_t record) {
  const auto it = std::find(vocab.begin(), vocab.end(), value);
  if (it == vocab.end()) {
    throw UnknownCategoryError("unseen value '" + value + "'" + cell_context(record, column));
  }
  return static_cast<int>(it - vocab.begin());
}

std::vector<std::string> sorted_distinct(const std::vector<std::vector<std::string>>& records,
                                         std::size_t col) {
  std::set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) seen.insert(records[r][col]);
  return std::vector<std::string>(seen.begin(), seen.end());
}

// Shared transform: maps parsed records through a fitted manifest.
Dataset transform(const std::vector<std::vector<std::string>>& records,
                  const DataManifest& manifest) {
  const CsvSchema& schema = manifest.schema;
  const std::vector<std::string>& header = records[0];
  const std::size_t label_ix = column_index(header, schema.label_col);
  const std::size_t group_ix = column_index(header, schema.sensitive_col);
  const bool has_client = !schema.client_col.empty();
  const std::size_t client_ix = has_client ? column_index(header, schema.client_col) : 0;
  std::vector<std::size_t> numeric_ix, cat_ix;
  for (const auto& c : schema.numeric_cols) numeric_ix.push_back(column_index(header, c));
  for (const auto& c : schema.categorical_cols) cat_ix.push_back(column_index(header, c));

  Dataset ds;
  ds.n = records.size() - 1;
  ds.d = manifest.feature_names.size();
  ds.features.assign(ds.n * ds.d, 0.0);
  ds.labels.resize(ds.n);
  ds.groups.resize(ds.n);
  if (has_client) ds.clients.resize(ds.n);
  ds.n_groups = manifest.sensitive_values.size();
  ds.n_clients = has_client ? manifest.client_values.size() : 1;

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& row = records[r];
    if (row.size() != header.size()) {
      throw ParseError("record " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    const std::size_t out = r - 1;
    double* feat = ds.features.data() + out * ds.d;
    std::size_t col_out = 0;
    for (std::size_t k = 0; k < numeric_ix.size(); ++k) {
      const std::string& name = schema.numeric_cols[k];
      const double raw = parse_number(row[numeric_ix[k]], r, name);
      feat[col_out++] = (raw - manifest.numeric_mean.at(name)) / manifest.numeric_std.at(name);
    }
    for (std::size_t k = 0; k < cat_ix.size(); ++k) {
      const std::string& name = schema.categorical_cols[k];
      const auto& vocab = manifest.categories.at(name);
      const int id = lookup_id(vocab, row[cat_ix[k]], name, r);
      feat[col_out + static_cast<std::size_t>(id)] = 1.0;
      col_out += vocab.size();
    }
    ds.labels[out] = lookup_id(manifest.label_values, row[label_ix], schema.label_col, r);
    ds.groups[out] = lookup_id(manifest.sensitive_values, row[group_ix], schema.sensitive_col, r);
    if (has_client) {
      ds.clients[out] = lookup_id(manifest.client_values, row[client_ix], schema.client_col, r);
    }
  }
  validate_dataset(ds);
  return ds;
}

void require_quotable(std::ostream& os, const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) {
    os << cell;
    return;
  }
  os << '"';
  for (char c : cell) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

}  // namespace

void validate_dataset(const Dataset& ds) {
  if (ds.labels.size() != ds.n || ds.groups.size() != ds.n ||
      (!ds.clients.empty() && ds.clients.size() != ds.n)) {
    throw DimensionError("dataset annotation lengths disagree with n");
  }
  if (ds.features.size() != ds.n * ds.d) {
    throw DimensionError("feature matrix is not n x d");
  }
  std::vector<bool> seen(ds.n_groups, false);
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.labels[i] != 0 && ds.labels[i] != 1) throw InvalidSpecError("labels must be 0 or 1");
    if (ds.groups[i] < 0 || static_cast<std::size_t>(ds.groups[i]) >= ds.n_groups) {
      throw InvalidSpecError("group id out of range");
    }
    seen[static_cast<std::size_t>(ds.groups[i])] = true;
    if (!ds.clients.empty() &&
        (ds.clients[i] < 0 || static_cast<std::size_t>(ds.clients[i]) >= ds.n_clients)) {
      throw InvalidSpecError("client id out of range");
    }
  }
  if (ds.n_groups < 2) throw DegenerateGroupError("need at least two sensitive groups");
  for (std::size_t a = 0; a < ds.n_groups; ++a) {
    if (!seen[a]) {
      throw DegenerateGroupError("sensitive group " + std::to_string(a) + " is absent");
    }
  }
}

Dataset client_view(const Dataset& ds, std::size_t client) {
  if (ds.clients.empty()) throw InvalidSpecError("dataset has no client assignment");
  if (client >= ds.n_clients) throw InvalidSpecError("client id out of range");
  Dataset out;
  out.d = ds.d;
  out.n_groups = ds.n_groups;
  out.n_clients = 1;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (static_cast<std::size_t>(ds.clients[i]) != client) continue;
    out.features.insert(out.features.end(), ds.features.begin() + i * ds.d,
                        ds.features.begin() + (i + 1) * ds.d);
    out.labels.push_back(ds.labels[i]);
    out.groups.push_back(ds.groups[i]);
    out.clients.push_back(0);
  }
  out.n = out.labels.size();
  if (out.n == 0) throw EmptyClientError("client " + std::to_string(client) + " has no samples");
  return out;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n == 0) throw InvalidSpecError("n must be positive");
  if (!(spec.label_rate > 0.0) || !(spec.label_rate < 1.0)) {
    throw InvalidSpecError("label_rate must lie strictly in (0, 1)");
  }
  const Chol2 ch0 = factor_cov(spec.class0.cov);
  const Chol2 ch1 = factor_cov(spec.class1.cov);
  Dataset ds;
  ds.n = spec.n;
  ds.d = 2;
  ds.n_groups = 2;
  ds.n_clients = 1;
  ds.features.resize(2 * spec.n);
  ds.labels.resize(spec.n);
  ds.groups.resize(spec.n);
  std::mt19937_64 rng(mix_seed(spec.seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int y = unif(rng) < spec.label_rate ? 1 : 0;
    const GaussianClass& g = y == 1 ? spec.class1 : spec.class0;
    const Chol2& ch = y == 1 ? ch1 : ch0;
    const double z0 = gauss(rng);
    const double z1 = gauss(rng);
    const double x0 = g.mean[0] + ch.l11 * z0;
    const double x1 = g.mean[1] + ch.l21 * z0 + ch.l22 * z1;
    const double p0 = gauss2_pdf(x0, x1, spec.class0);
    const double p1 = gauss2_pdf(x0, x1, spec.class1);
    const double share = (p0 + p1) > 0.0 ? p1 / (p0 + p1) : 0.5;
    ds.labels[i] = y;
    ds.features[2 * i] = x0;
    ds.features[2 * i + 1] = x1;
    ds.groups[i] = unif(rng) < share ? 1 : 0;
  }
  validate_dataset(ds);
  return ds;
}

SplitSpec split_preset(const std::string& level) {
  SplitSpec s;
  if (level == "low") {
    s.proportions = {{0.33, 0.33, 0.34}, {0.33, 0.33, 0.34}};
  } else if (level == "medium") {
    s.proportions = {{0.50, 0.30, 0.20}, {0.20, 0.40, 0.40}};
  } else if (level == "high") {
    s.proportions = {{0.70, 0.10, 0.20}, {0.10, 0.80, 0.10}};
  } else {
    throw InvalidSpecError("unknown split preset: " + level);
  }
  return s;
}

Dataset split_clients(const Dataset& ds, const SplitSpec& split, std::uint64_t seed) {
  validate_dataset(ds);
  if (split.proportions.size() != ds.n_groups) {
    throw InvalidSpecError("need one proportion row per sensitive group");
  }
  const std::size_t n_clients = split.proportions.front().size();
  if (n_clients == 0) throw InvalidSpecError("need at least one client");
  for (const auto& row : split.proportions) {
    if (row.size() != n_clients) throw InvalidSpecError("ragged proportion rows");
    double sum = 0.0;
    for (double p : row) {
      if (p < 0.0) throw InvalidSpecError("proportions must be nonnegative");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw InvalidSpecError("proportion rows must sum to 1");
  }
  Dataset out = ds;
  out.clients.assign(ds.n, 0);
  out.n_clients = n_clients;
  std::vector<std::size_t> client_total(n_clients, 0);
  for (std::size_t a = 0; a < ds.n_groups; ++a) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.n; ++i) {
      if (static_cast<std::size_t>(ds.groups[i]) == a) members.push_back(i);
    }
    std::mt19937_64 rng(mix_seed(seed, a));
    std::shuffle(members.begin(), members.end(), rng);
    const double m = static_cast<double>(members.size());
    double cum = 0.0;
    std::size_t start = 0;
    for (std::size_t j = 0; j < n_clients; ++j) {
      cum += split.proportions[a][j];
      const std::size_t stop =
          j + 1 == n_clients ? members.size()
                             : std::min(members.size(), static_cast<std::size_t>(
                                                            std::llround(cum * m)));
      for (std::size_t k = start; k < stop; ++k) {
        out.clients[members[k]] = static_cast<int>(j);
      }
      client_total[j] += stop - start;
      start = stop;
    }
  }
  for (std::size_t j = 0; j < n_clients; ++j) {
    if (client_total[j] == 0) {
      throw EmptyClientError("client " + std::to_string(j) + " would receive no samples");
    }
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double ratio,
                                             std::uint64_t seed) {
  validate_dataset(ds);
  if (!(ratio > 0.0) || !(ratio < 1.0)) throw InvalidSpecError("ratio must lie in (0, 1)");
  const std::size_t n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ds.n)));
  if (n_train == 0 || n_train == ds.n) {
    throw DegenerateSplitError("split would leave one side empty");
  }
  std::vector<std::size_t> order(ds.n);
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, attempt));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> train_has(ds.n_groups, false), test_has(ds.n_groups, false);
    for (std::size_t k = 0; k < ds.n; ++k) {
      auto& flags = k < n_train ? train_has : test_has;
      flags[static_cast<std::size_t>(ds.groups[order[k]])] = true;
    }
    const bool ok = std::all_of(train_has.begin(), train_has.end(), [](bool b) { return b; }) &&
                    std::all_of(test_has.begin(), test_has.end(), [](bool b) { return b; });
    if (!ok) continue;
    auto take = [&ds](const std::vector<std::size_t>& order_slice, std::size_t lo,
                      std::size_t hi) {
      Dataset part;
      part.d = ds.d;
      part.n_groups = ds.n_groups;
      part.n_clients = ds.n_clients;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = order_slice[k];
        part.features.insert(part.features.end(), ds.features.begin() + i * ds.d,
                             ds.features.begin() + (i + 1) * ds.d);
        part.labels.push_back(ds.labels[i]);
        part.groups.push_back(ds.groups[i]);
        if (!ds.clients.empty()) part.clients.push_back(ds.clients[i]);
      }
      part.n = part.labels.size();
      return part;
    };
    return {take(order, 0, n_train), take(order, n_train, ds.n)};
  }
  throw DegenerateSplitError("could not keep every group on both sides in 100 draws");
}

IngestResult load_csv(const std::string& path, const CsvSchema& schema) {
  const auto records = parse_csv(path);
  const std::vector<std::string>& header = records[0];
  if (records.size() < 2) throw ParseError("no data records in " + path);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw ParseError("record " + std::to_string(r + 1) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
  }
  DataManifest manifest;
  manifest.schema = schema;
  for (const auto& name : schema.numeric_cols) {
    const std::size_t ix = column_index(header, name);
    double sum = 0.0;
    for (std::size_t r = 1; r < records.size(); ++r) sum += parse_number(records[r][ix], r, name);
    const double n = static_cast<double>(records.size() - 1);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const double dl = parse_number(records[r][ix], r, name) - mean;
      ss += dl * dl;
    }
    manifest.numeric_mean[name] = mean;
    manifest.numeric_std[name] = std::max(std::sqrt(ss / n), kStdFloor);
    manifest.feature_names.push_back(name);
  }
  for (const auto& name : schema.categorical_cols) {
    const std::size_t ix = column_index(header, name);
    manifest.categories[name] = sorted_distinct(records, ix);
    for (const auto& cat : manifest.categories[name]) {
      manifest.feature_names.push_back(name + "=" + cat);
    }
  }
  manifest.label_values = sorted_distinct(records, column_index(header, schema.label_col));
  if (manifest.label_values.size() != 2) {
    throw ParseError("label column must take exactly two distinct values");
  }
  manifest.sensitive_values = sorted_distinct(records, column_index(header, schema.sensitive_col));
  if (!schema.client_col.empty()) {
    manifest.client_values = sorted_distinct(records, column_index(header, schema.client_col));
  }
  IngestResult result;
  result.manifest = manifest;
  result.dataset = transform(records, manifest);
  return result;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema, const DataManifest& manifest) {
  if (schema.label_col != manifest.schema.label_col ||
      schema.sensitive_col != manifest.schema.sensitive_col ||
      schema.client_col != manifest.schema.client_col ||
      schema.numeric_cols != manifest.schema.numeric_cols ||
      schema.categorical_cols != manifest.schema.categorical_cols) {
    throw InvalidSpecError("schema does not match the manifest");
  }
  return transform(parse_csv(path), manifest);
}

void save_csv(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerializationError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < ds.d; ++j) out << "x" << j << ",";
  out << "label,sensitive";
  const bool has_client = !ds.clients.empty();
  if (has_client) out << ",client";
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) out << ds.features[i * ds.d + j] << ",";
    out << ds.labels[i] << "," << ds.groups[i];
    if (has_client) out << "," << ds.clients[i];
    out << "\n";
  }
  if (!out) throw SerializationError("short write: " + path);
}

std::string manifest_to_json(const DataManifest& m) {
  nlohmann::json j;
  j["schema"] = {{"label_col", m.schema.label_col},
                 {"sensitive_col", m.schema.sensitive_col},
                 {"client_col", m.schema.client_col},
                 {"numeric_cols", m.schema.numeric_cols},
                 {"categorical_cols", m.schema.categorical_cols}};
  j["feature_names"] = m.feature_names;
  j["numeric_mean"] = m.numeric_mean;
  j["numeric_std"] = m.numeric_std;
  j["categories"] = m.categories;
  j["label_values"] = m.label_values;
  j["sensitive_values"] = m.sensitive_values;
  j["client_values"] = m.client_values;
  return j.dump(2);
}

DataManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DataManifest m;
  try {
    const auto& s = j.at("schema");
    m.schema.label_col = s.at("label_col").get<std::string>();
    m.schema.sensitive_col = s.at("sensitive_col").get<std::string>();
    m.schema.client_col = s.at("client_col").get<std::string>();
    m.schema.numeric_cols = s.at("numeric_cols").get<std::vector<std::string>>();
    m.schema.categorical_cols = s.at("categorical_cols").get<std::vector<std::string>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.numeric_mean = j.at("numeric_mean").get<std::map<std::string, double>>();
    m.numeric_std = j.at("numeric_std").get<std::map<std::string, double>>();
    m.categories = j.at("categories").get<std::map<std::string, std::vector<std::string>>>();
    m.label_values = j.at("label_values").get<std::vector<std::string>>();
    m.sensitive_values = j.at("sensitive_values").get<std::vector<std::string>>();
    m.client_values = j.at("client_values").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest field error: ") + e.what());
  }
  return m;
}

void save_manifest(const DataManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SerializationError("cannot open for writing: " + path);
  out << manifest_to_json(manifest) << "\n";
  if (!out) throw SerializationError("short write: " + path);
}

DataManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerializationError("cannot open for reading: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return manifest_from_json(text);
}

}  // namespace fedfair
