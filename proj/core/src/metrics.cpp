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
#include "fedfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fedfair {
namespace {

constexpr double kProbClip = 1e-7;

struct MeanCell {
  double sum = 0.0;
  double n = 0.0;
  double mean(const std::string& what) const {
    if (n == 0.0) throw MissingGroupError("no samples for " + what);
    return sum / n;
  }
};

double max_abs_deviation(const std::vector<MeanCell>& cells, const MeanCell& overall,
                         const std::string& what) {
  const double base = overall.mean(what);
  double worst = 0.0;
  for (std::size_t a = 0; a < cells.size(); ++a) {
    worst = std::max(worst,
                     std::fabs(cells[a].mean(what + ", group " + std::to_string(a)) - base));
  }
  return worst;
}

double max_pairwise_gap(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

std::string trim_leading_zero(const std::string& s) {
  if (s.rfind("0.", 0) == 0) return s.substr(1);
  if (s.rfind("-0.", 0) == 0) return "-" + s.substr(2);
  return s;
}

}  // namespace

EvalReport evaluate(const Predictor& predictor, const Dataset& ds) {
  try {
    validate_dataset(ds);
  } catch (const DegenerateGroupError& e) {
    throw MissingGroupError(e.what());
  }
  const std::size_t groups = ds.n_groups;
  const bool has_clients = !ds.clients.empty();
  const std::size_t clients = has_clients ? ds.n_clients : 1;

  MeanCell overall;
  std::vector<MeanCell> by_group(groups);
  std::vector<MeanCell> by_label(2);
  std::vector<MeanCell> by_cell(2 * groups);  // index y * groups + a
  std::vector<MeanCell> by_client(clients);
  double correct = 0.0;

  for (std::size_t i = 0; i < ds.n; ++i) {
    const int a = ds.groups[i];
    const int y = ds.labels[i];
    const double p = predictor(ds.features.data() + i * ds.d, a);
    if (!(p >= 0.0) || !(p <= 1.0)) {
      throw InvalidSpecError("predictor must return a probability in [0, 1]");
    }
    overall.sum += p;
    overall.n += 1.0;
    by_group[a].sum += p;
    by_group[a].n += 1.0;
    by_label[y].sum += p;
    by_label[y].n += 1.0;
    by_cell[y * groups + a].sum += p;
    by_cell[y * groups + a].n += 1.0;
    const int pred = p > 0.5 ? 1 : 0;
    if (pred == y) correct += 1.0;
    const std::size_t c = has_clients ? static_cast<std::size_t>(ds.clients[i]) : 0;
    by_client[c].sum += bce_loss(clamp(p, kProbClip, 1.0 - kProbClip), y);
    by_client[c].n += 1.0;
  }

  EvalReport r;
  r.accuracy = correct / static_cast<double>(ds.n);
  r.group_rates.resize(groups);
  for (std::size_t a = 0; a < groups; ++a) {
    r.group_rates[a] = by_group[a].mean("group " + std::to_string(a));
  }
  r.dp_disp_multi = max_abs_deviation(by_group, overall, "dataset");
  r.dp_disp_binary = max_pairwise_gap(r.group_rates);

  std::vector<MeanCell> positives(by_cell.begin() + groups, by_cell.end());
  r.eo_disp = max_abs_deviation(positives, by_label[1], "label 1");
  std::vector<MeanCell> negatives(by_cell.begin(), by_cell.begin() + groups);
  r.eod_disp = std::max(r.eo_disp, max_abs_deviation(negatives, by_label[0], "label 0"));

  r.client_losses.resize(clients);
  for (std::size_t c = 0; c < clients; ++c) {
    if (by_client[c].n == 0.0) {
      throw EmptyClientError("client " + std::to_string(c) + " has no samples to evaluate");
    }
    r.client_losses[c] = by_client[c].sum / by_client[c].n;
  }
  r.cp_disp = max_pairwise_gap(r.client_losses);
  return r;
}

EvalReport evaluate(const ModelParams& params, const Dataset& ds) {
  if (params.dim != ds.d) throw DimensionError("model dimension does not match the dataset");
  return evaluate([&params](const double* x, int) { return forward(params, x); }, ds);
}

std::vector<std::uint64_t> default_seeds() { return {0, 1, 2, 3, 4}; }

std::map<std::string, SummaryStat> replicate(const Experiment& experiment,
                                             const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw InvalidSpecError("replicate needs at least two seeds");
  std::map<std::string, std::vector<double>> samples;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const std::map<std::string, double> run = experiment(seeds[k]);
    if (k == 0) {
      for (const auto& [name, value] : run) samples[name] = {value};
    } else {
      if (run.size() != samples.size()) {
        throw InvalidSpecError("experiment metric names changed between seeds");
      }
      for (const auto& [name, value] : run) {
        const auto it = samples.find(name);
        if (it == samples.end()) {
          throw InvalidSpecError("experiment metric names changed between seeds");
        }
        it->second.push_back(value);
      }
    }
  }
  std::map<std::string, SummaryStat> out;
  const double n = static_cast<double>(seeds.size());
  for (const auto& [name, values] : samples) {
    SummaryStat s;
    const bool constant =
        std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    if (constant) {
      s.mean = values[0];
      s.std = 0.0;
      out[name] = s;
      continue;
    }
    for (double v : values) s.mean += v;
    s.mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
    out[name] = s;
  }
  return out;
}

std::string format_stat(const SummaryStat& s) {
  char mean_buf[64];
  char std_buf[64];
  std::snprintf(mean_buf, sizeof(mean_buf), "%.3f", s.mean);
  std::snprintf(std_buf, sizeof(std_buf), "%.3f", s.std);
  return trim_leading_zero(mean_buf) + "±" + trim_leading_zero(std_buf);
}

}  // namespace fedfair
