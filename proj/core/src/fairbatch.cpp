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
#include "fedfair/fairbatch.hpp"

#include <algorithm>
#include <cmath>

namespace fedfair {

namespace {

constexpr double kZeroTol = 1e-12;

void check_annotations(const std::vector<int>& labels, const std::vector<int>& groups,
                       const std::vector<int>& client_ids, std::size_t n_groups,
                       std::size_t n_clients) {
  if (n_groups < 2) throw InvalidSpecError("group annotations: need at least two groups");
  if (labels.size() != groups.size()) {
    throw DimensionError("group annotations: labels and groups differ in length");
  }
  if (!client_ids.empty() && client_ids.size() != labels.size()) {
    throw DimensionError("group annotations: client ids differ in length");
  }
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] != 0 && labels[s] != 1) {
      throw InvalidSpecError("group annotations: labels must be 0/1");
    }
    if (groups[s] < 0 || static_cast<std::size_t>(groups[s]) >= n_groups) {
      throw InvalidSpecError("group annotations: group id out of range");
    }
    if (!client_ids.empty() &&
        (client_ids[s] < 0 || static_cast<std::size_t>(client_ids[s]) >= n_clients)) {
      throw InvalidSpecError("group annotations: client id out of range");
    }
  }
}

// Scales a capped block so its sum drops to the cap; coordinates are already
// nonnegative, so uniform scaling stays inside the box.
void rescale_block(std::vector<double>& v, std::size_t begin, std::size_t end, double cap) {
  double sum = 0.0;
  for (std::size_t k = begin; k < end; ++k) sum += v[k];
  if (sum > cap && sum > 0.0) {
    const double scale = cap / sum;
    for (std::size_t k = begin; k < end; ++k) v[k] *= scale;
  }
}

}  // namespace

const char* notion_name(Notion n) {
  switch (n) {
    case Notion::kDp:
      return "dp";
    case Notion::kEo:
      return "eo";
    case Notion::kEod:
      return "eod";
    case Notion::kCp:
      return "cp";
  }
  return "unknown";
}

Notion notion_from_name(const std::string& name) {
  if (name == "dp") return Notion::kDp;
  if (name == "eo") return Notion::kEo;
  if (name == "eod") return Notion::kEod;
  if (name == "cp") return Notion::kCp;
  throw ConfigError("unknown fairness notion: " + name);
}

std::int64_t GroupCounts::n_ya(int y, std::size_t a) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < clients; ++i) s += at(i, y, a);
  return s;
}

std::int64_t GroupCounts::n_star_a(std::size_t a) const { return n_ya(0, a) + n_ya(1, a); }

std::int64_t GroupCounts::n_y_star(int y) const {
  std::int64_t s = 0;
  for (std::size_t a = 0; a < groups; ++a) s += n_ya(y, a);
  return s;
}

std::int64_t GroupCounts::n_client(std::size_t i) const {
  std::int64_t s = 0;
  for (int y = 0; y < 2; ++y) {
    for (std::size_t a = 0; a < groups; ++a) s += at(i, y, a);
  }
  return s;
}

std::int64_t GroupCounts::total() const {
  std::int64_t s = 0;
  for (std::int64_t c : cell) s += c;
  return s;
}

GroupCounts count_groups(const std::vector<int>& labels, const std::vector<int>& groups,
                         const std::vector<int>& client_ids, std::size_t n_groups,
                         std::size_t n_clients) {
  if (n_clients < 1) throw InvalidSpecError("count_groups: need at least one client");
  check_annotations(labels, groups, client_ids, n_groups, n_clients);
  GroupCounts c;
  c.groups = n_groups;
  c.clients = n_clients;
  c.cell.assign(n_clients * 2 * n_groups, 0);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const std::size_t i = client_ids.empty() ? 0 : static_cast<std::size_t>(client_ids[s]);
    const std::size_t idx =
        (i * 2 + static_cast<std::size_t>(labels[s])) * n_groups + static_cast<std::size_t>(groups[s]);
    ++c.cell[idx];
  }
  return c;
}

GroupCounts merge_counts(const std::vector<GroupCounts>& per_client) {
  if (per_client.empty()) throw InvalidSpecError("merge_counts: need at least one table");
  GroupCounts out;
  out.groups = per_client.front().groups;
  out.clients = 0;
  for (const GroupCounts& c : per_client) {
    if (c.groups != out.groups) {
      throw DimensionError("merge_counts: tables disagree on the number of groups");
    }
    if (c.cell.size() != c.clients * 2 * c.groups) {
      throw DimensionError("merge_counts: malformed count table");
    }
    out.clients += c.clients;
    out.cell.insert(out.cell.end(), c.cell.begin(), c.cell.end());
  }
  return out;
}

GroupLossReport compute_group_losses(const std::vector<double>& loss,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& groups,
                                     const std::vector<int>& client_ids, std::size_t n_groups,
                                     std::size_t n_clients) {
  if (loss.size() != labels.size()) {
    throw DimensionError("compute_group_losses: loss and labels differ in length");
  }
  check_annotations(labels, groups, client_ids, n_groups, n_clients);
  GroupLossReport r;
  r.groups = n_groups;
  r.clients = n_clients;
  r.mean_ya.assign(2 * n_groups, 0.0);
  r.client_mean.assign(n_clients, 0.0);
  std::vector<std::int64_t> cell_n(2 * n_groups, 0);
  std::vector<std::int64_t> client_n(n_clients, 0);
  for (std::size_t s = 0; s < loss.size(); ++s) {
    const std::size_t ya =
        static_cast<std::size_t>(labels[s]) * n_groups + static_cast<std::size_t>(groups[s]);
    r.mean_ya[ya] += loss[s];
    ++cell_n[ya];
    const std::size_t i = client_ids.empty() ? 0 : static_cast<std::size_t>(client_ids[s]);
    r.client_mean[i] += loss[s];
    ++client_n[i];
  }
  for (std::size_t k = 0; k < r.mean_ya.size(); ++k) {
    if (cell_n[k] > 0) r.mean_ya[k] /= static_cast<double>(cell_n[k]);
  }
  for (std::size_t i = 0; i < n_clients; ++i) {
    if (client_n[i] > 0) r.client_mean[i] /= static_cast<double>(client_n[i]);
  }
  return r;
}

LambdaWeights init_lambda(Notion notion, const GroupCounts& counts) {
  LambdaWeights lam;
  lam.notion = notion;
  lam.groups = counts.groups;
  lam.clients = counts.clients;
  const double n = static_cast<double>(counts.total());
  if (n <= 0.0) throw InvalidSpecError("init_lambda: empty dataset");
  const std::size_t a_free = counts.groups - 1;
  switch (notion) {
    case Notion::kDp:
      for (std::size_t a = 0; a < counts.groups; ++a) {
        lam.v.push_back(static_cast<double>(counts.n_star_a(a)) / n);
      }
      break;
    case Notion::kEo:
      for (std::size_t a = 1; a < counts.groups; ++a) {
        lam.v.push_back(static_cast<double>(counts.n_ya(1, a)) / n);
      }
      break;
    case Notion::kEod:
      for (int y = 0; y < 2; ++y) {
        for (std::size_t a = 1; a < counts.groups; ++a) {
          lam.v.push_back(static_cast<double>(counts.n_ya(y, a)) / n);
        }
      }
      (void)a_free;
      break;
    case Notion::kCp:
      for (std::size_t i = 1; i < counts.clients; ++i) {
        lam.v.push_back(static_cast<double>(counts.n_client(i)) / n);
      }
      break;
  }
  return lam;
}

LambdaWeights project_lambda(LambdaWeights lam, const GroupCounts& counts) {
  const double n = static_cast<double>(counts.total());
  const std::size_t a_free = counts.groups - 1;
  switch (lam.notion) {
    case Notion::kDp:
      for (std::size_t a = 0; a < counts.groups; ++a) {
        const double hi = 2.0 * static_cast<double>(counts.n_star_a(a)) / n;
        lam.v[a] = clamp(lam.v[a], 0.0, hi);
      }
      break;
    case Notion::kEo:
      for (double& x : lam.v) x = std::max(x, 0.0);
      rescale_block(lam.v, 0, lam.v.size(), static_cast<double>(counts.n_y_star(1)) / n);
      break;
    case Notion::kEod:
      for (double& x : lam.v) x = std::max(x, 0.0);
      for (int y = 0; y < 2; ++y) {
        rescale_block(lam.v, static_cast<std::size_t>(y) * a_free,
                      (static_cast<std::size_t>(y) + 1) * a_free,
                      static_cast<double>(counts.n_y_star(y)) / n);
      }
      break;
    case Notion::kCp:
      for (double& x : lam.v) x = std::max(x, 0.0);
      rescale_block(lam.v, 0, lam.v.size(), 1.0);
      break;
  }
  return lam;
}

FStatistics compute_stats(Notion notion, const GroupLossReport& report,
                          const GroupCounts& counts) {
  if (report.groups != counts.groups || report.clients != counts.clients) {
    throw DimensionError("compute_stats: report and counts disagree on shape");
  }
  FStatistics f;
  f.notion = notion;
  const double n = static_cast<double>(counts.total());
  const std::size_t A = counts.groups;
  auto mean = [&](int y, std::size_t a) { return report.mean_ya[static_cast<std::size_t>(y) * A + a]; };
  switch (notion) {
    case Notion::kDp: {
      for (std::size_t a = 0; a < A; ++a) {
        if (counts.n_star_a(a) == 0) {
          throw DegenerateGroupError("compute_stats: a sensitive group has no samples");
        }
      }
      // L'_{y,a} = (n_{y,a}/n_{*,a}) L_{y,a}
      auto lp = [&](int y, std::size_t a) {
        return (static_cast<double>(counts.n_ya(y, a)) / static_cast<double>(counts.n_star_a(a))) *
               mean(y, a);
      };
      const double base0 = static_cast<double>(counts.n_ya(0, 0)) /
                           static_cast<double>(counts.n_star_a(0));
      for (std::size_t a = 1; a < A; ++a) {
        const double base_a = static_cast<double>(counts.n_ya(0, a)) /
                              static_cast<double>(counts.n_star_a(a));
        f.values.push_back(-lp(0, 0) + lp(1, 0) + lp(0, a) - lp(1, a) + base0 - base_a);
      }
      break;
    }
    case Notion::kEo:
      for (std::size_t a = 0; a < A; ++a) {
        if (counts.n_ya(1, a) == 0) {
          throw DegenerateGroupError("compute_stats: a group has no positive samples");
        }
      }
      for (std::size_t a = 1; a < A; ++a) f.values.push_back(mean(1, a) - mean(1, 0));
      break;
    case Notion::kEod:
      for (int y = 0; y < 2; ++y) {
        for (std::size_t a = 0; a < A; ++a) {
          if (counts.n_ya(y, a) == 0) {
            throw DegenerateGroupError("compute_stats: a (label, group) cell is empty");
          }
        }
      }
      for (int y = 0; y < 2; ++y) {
        for (std::size_t a = 1; a < A; ++a) f.values.push_back(mean(y, a) - mean(y, 0));
      }
      break;
    case Notion::kCp:
      for (std::size_t i = 0; i < counts.clients; ++i) {
        if (counts.n_client(i) == 0) throw EmptyClientError("compute_stats: a client is empty");
      }
      for (std::size_t i = 1; i < counts.clients; ++i) {
        f.values.push_back(report.client_mean[i] - report.client_mean[0]);
      }
      break;
  }
  (void)n;
  return f;
}

std::vector<double> update_direction(const FStatistics& stats) {
  if (stats.notion != Notion::kDp) return stats.values;
  std::vector<double> mu;
  mu.reserve(stats.values.size() + 1);
  double sum = 0.0;
  for (double v : stats.values) sum += v;
  mu.push_back(-sum);
  mu.insert(mu.end(), stats.values.begin(), stats.values.end());
  return mu;
}

LambdaWeights update_lambda(const LambdaWeights& lam, const FStatistics& stats, double alpha,
                            const GroupCounts& counts) {
  if (!(alpha > 0.0)) throw InvalidSpecError("update_lambda: alpha must be positive");
  if (lam.notion != stats.notion) {
    throw InvalidSpecError("update_lambda: weights and statistics disagree on notion");
  }
  const std::vector<double> mu = update_direction(stats);
  if (mu.size() != lam.v.size()) {
    throw DimensionError("update_lambda: direction and weights differ in length");
  }
  const double norm = l2_norm(mu);
  if (norm <= kZeroTol) return lam;
  LambdaWeights next = lam;
  for (std::size_t k = 0; k < mu.size(); ++k) next.v[k] += (alpha / norm) * mu[k];
  return project_lambda(std::move(next), counts);
}

CellWeights sample_weights(const LambdaWeights& lam, const GroupCounts& counts) {
  CellWeights w;
  w.notion = lam.notion;
  w.groups = counts.groups;
  w.clients = counts.clients;
  const double n = static_cast<double>(counts.total());
  const std::size_t A = counts.groups;
  const std::size_t a_free = A - 1;
  auto cell_count = [&](int y, std::size_t a) { return static_cast<double>(counts.n_ya(y, a)); };
  switch (lam.notion) {
    case Notion::kDp:
      w.by_cell.assign(2 * A, 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        const double na = static_cast<double>(counts.n_star_a(a));
        if (na == 0.0) continue;
        w.by_cell[a] = n * lam.v[a] / na;
        w.by_cell[A + a] = n * (2.0 * na / n - lam.v[a]) / na;
      }
      break;
    case Notion::kEo: {
      w.by_cell.assign(2 * A, 1.0);
      double sum = 0.0;
      for (double x : lam.v) sum += x;
      for (std::size_t a = 1; a < A; ++a) {
        const double c = cell_count(1, a);
        w.by_cell[A + a] = c > 0.0 ? n * lam.v[a - 1] / c : 0.0;
      }
      const double c10 = cell_count(1, 0);
      w.by_cell[A] =
          c10 > 0.0 ? n * (static_cast<double>(counts.n_y_star(1)) / n - sum) / c10 : 0.0;
      break;
    }
    case Notion::kEod: {
      w.by_cell.assign(2 * A, 0.0);
      for (int y = 0; y < 2; ++y) {
        double sum = 0.0;
        for (std::size_t a = 1; a < A; ++a) sum += lam.v[static_cast<std::size_t>(y) * a_free + a - 1];
        for (std::size_t a = 1; a < A; ++a) {
          const double c = cell_count(y, a);
          w.by_cell[static_cast<std::size_t>(y) * A + a] =
              c > 0.0 ? n * lam.v[static_cast<std::size_t>(y) * a_free + a - 1] / c : 0.0;
        }
        const double c0 = cell_count(y, 0);
        w.by_cell[static_cast<std::size_t>(y) * A] =
            c0 > 0.0 ? n * (static_cast<double>(counts.n_y_star(y)) / n - sum) / c0 : 0.0;
      }
      break;
    }
    case Notion::kCp: {
      w.by_client.assign(counts.clients, 0.0);
      double sum = 0.0;
      for (double x : lam.v) sum += x;
      for (std::size_t i = 1; i < counts.clients; ++i) {
        const double c = static_cast<double>(counts.n_client(i));
        w.by_client[i] = c > 0.0 ? n * lam.v[i - 1] / c : 0.0;
      }
      const double c0 = static_cast<double>(counts.n_client(0));
      w.by_client[0] = c0 > 0.0 ? n * (1.0 - sum) / c0 : 0.0;
      break;
    }
  }
  return w;
}

double weight_for(const CellWeights& w, int y, int a, int client) {
  if (w.notion == Notion::kCp) {
    if (client < 0 || static_cast<std::size_t>(client) >= w.clients) {
      throw InvalidSpecError("weight_for: client id out of range");
    }
    return w.by_client[static_cast<std::size_t>(client)];
  }
  if (y != 0 && y != 1) throw InvalidSpecError("weight_for: label must be 0/1");
  if (a < 0 || static_cast<std::size_t>(a) >= w.groups) {
    throw InvalidSpecError("weight_for: group id out of range");
  }
  return w.by_cell[static_cast<std::size_t>(y) * w.groups + static_cast<std::size_t>(a)];
}

double outer_objective(const FStatistics& stats) {
  double s = 0.0;
  for (double v : stats.values) s += v * v;
  return s;
}

Prop1Result verify_prop1(const std::vector<int>& labels, const std::vector<int>& groups,
                         const std::vector<int>& preds, std::size_t n_groups) {
  if (preds.size() != labels.size()) {
    throw DimensionError("verify_prop1: predictions and labels differ in length");
  }
  for (int p : preds) {
    if (p != 0 && p != 1) throw InvalidSpecError("verify_prop1: predictions must be 0/1");
  }
  const GroupCounts counts = count_groups(labels, groups, {}, n_groups, 1);
  std::vector<double> loss(labels.size());
  for (std::size_t s = 0; s < labels.size(); ++s) {
    loss[s] = preds[s] == labels[s] ? 0.0 : 1.0;
  }
  const GroupLossReport report = compute_group_losses(loss, labels, groups, {}, n_groups, 1);
  const FStatistics f = compute_stats(Notion::kDp, report, counts);

  Prop1Result r;
  r.stats_zero = true;
  for (double v : f.values) {
    if (std::fabs(v) > kZeroTol) r.stats_zero = false;
  }
  std::vector<double> rate(n_groups, 0.0);
  std::vector<std::int64_t> size(n_groups, 0);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    rate[static_cast<std::size_t>(groups[s])] += preds[s];
    ++size[static_cast<std::size_t>(groups[s])];
  }
  for (std::size_t a = 0; a < n_groups; ++a) {
    if (size[a] == 0) throw DegenerateGroupError("verify_prop1: a group has no samples");
    rate[a] /= static_cast<double>(size[a]);
  }
  r.parity_holds = true;
  for (std::size_t a = 1; a < n_groups; ++a) {
    if (std::fabs(rate[a] - rate[0]) > kZeroTol) r.parity_holds = false;
  }
  return r;
}

}  // namespace fedfair
