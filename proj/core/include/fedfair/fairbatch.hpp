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
#ifndef FEDFAIR_FAIRBATCH_HPP_
#define FEDFAIR_FAIRBATCH_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair {

// The four parity notions the reweighting core supports: demographic parity,
// equal opportunity, equalized odds, and client (loss) parity.
enum class Notion { kDp, kEo, kEod, kCp };

const char* notion_name(Notion n);
Notion notion_from_name(const std::string& name);

// Per-(client, label, group) sample counts plus the derived marginals every
// statistic needs. Built once per dataset partition and treated as immutable.
struct GroupCounts {
  std::size_t groups = 0;   // number of sensitive groups A
  std::size_t clients = 1;  // number of clients I
  // cell[(i*2 + y)*groups + a] = n_{y,a}^(i)
  std::vector<std::int64_t> cell;

  std::int64_t at(std::size_t i, int y, std::size_t a) const {
    return cell[(i * 2 + static_cast<std::size_t>(y)) * groups + a];
  }
  std::int64_t n_ya(int y, std::size_t a) const;      // summed over clients
  std::int64_t n_star_a(std::size_t a) const;         // summed over y
  std::int64_t n_y_star(int y) const;                 // summed over groups
  std::int64_t n_client(std::size_t i) const;
  std::int64_t total() const;
};

// Tallies counts from per-sample annotations. client_ids may be empty, in
// which case every sample belongs to one client. Values must lie in range.
GroupCounts count_groups(const std::vector<int>& labels, const std::vector<int>& groups,
                         const std::vector<int>& client_ids, std::size_t n_groups,
                         std::size_t n_clients);

// Stacks single-client count tables into one multi-client table, in the
// given order. All inputs must agree on the number of groups.
GroupCounts merge_counts(const std::vector<GroupCounts>& per_client);

// Mean losses per (label, group) cell and per client. Cells with no samples
// report 0; consumers that need those cells guard on the counts.
struct GroupLossReport {
  std::size_t groups = 0;
  std::size_t clients = 1;
  std::vector<double> mean_ya;      // [y*groups + a]
  std::vector<double> client_mean;  // [i]
};

GroupLossReport compute_group_losses(const std::vector<double>& loss,
                                     const std::vector<int>& labels,
                                     const std::vector<int>& groups,
                                     const std::vector<int>& client_ids, std::size_t n_groups,
                                     std::size_t n_clients);

// The outer variable of the bi-level problem. Coordinate layout per notion:
//   kDp:  lambda_a for a in [0, A), each in [0, 2 n_{*,a}/n]
//   kEo:  lambda_a for a in [1, A), nonnegative, sum <= n_{1,*}/n
//   kEod: lambda_{y,a} for y in {0,1}, a in [1, A), stored y-major with
//         stride A-1; per-y nonnegative with sum_a <= n_{y,*}/n
//   kCp:  lambda_i for i in [1, I), nonnegative, sum <= 1
struct LambdaWeights {
  Notion notion = Notion::kDp;
  std::size_t groups = 0;
  std::size_t clients = 1;
  std::vector<double> v;
};

// Feasible starting point whose induced sample weights are identically 1:
// group (or client) base rates.
LambdaWeights init_lambda(Notion notion, const GroupCounts& counts);

// Projection onto the feasible set: coordinate-wise clipping to the box,
// then a uniform rescale of any capped-sum block that still overflows.
LambdaWeights project_lambda(LambdaWeights lam, const GroupCounts& counts);

// Notion-specific unfairness statistics computed from mean losses:
//   kDp:  F_a (a >= 1) from the reweighted-loss identity; under 0-1 loss
//         F_a equals (group-a positive rate) - (group-0 positive rate)
//   kEo:  L_{1,a} - L_{1,0} for a >= 1
//   kEod: L_{y,a} - L_{y,0}, y-major, a >= 1
//   kCp:  L^(i) - L^(0) for i >= 1
struct FStatistics {
  Notion notion = Notion::kDp;
  std::vector<double> values;
};

FStatistics compute_stats(Notion notion, const GroupLossReport& report,
                          const GroupCounts& counts);

// The ascent direction mu paired with the statistics: for kDp the leading
// coordinate is -(sum of F_a) followed by the F_a themselves; for the other
// notions mu is the statistics vector itself.
std::vector<double> update_direction(const FStatistics& stats);

// One outer step: lambda += (alpha/||mu||_2) mu, then projection. The step
// has L2 norm exactly alpha before projection; when ||mu|| = 0 the weights
// are returned unchanged.
LambdaWeights update_lambda(const LambdaWeights& lam, const FStatistics& stats, double alpha,
                            const GroupCounts& counts);

// Per-sample loss weights induced by lambda, normalized so the initial
// lambda yields weight 1 for every sample (inner objective = mean loss).
// kDp/kEo/kEod weight by (y, a) cell; kCp weights by client.
struct CellWeights {
  Notion notion = Notion::kDp;
  std::size_t groups = 0;
  std::size_t clients = 1;
  std::vector<double> by_cell;    // [y*groups + a]; empty for kCp
  std::vector<double> by_client;  // [i]; empty unless kCp
};

CellWeights sample_weights(const LambdaWeights& lam, const GroupCounts& counts);

// Resolves one sample's weight from its annotations.
double weight_for(const CellWeights& w, int y, int a, int client);

// Sum of squared statistics; the quantity the outer iteration descends.
double outer_objective(const FStatistics& stats);

// Both sides of the parity equivalence under 0-1 loss: whether all demographic
// statistics vanish, and whether empirical group positive rates are equal.
struct Prop1Result {
  bool stats_zero = false;
  bool parity_holds = false;
};

Prop1Result verify_prop1(const std::vector<int>& labels, const std::vector<int>& groups,
                         const std::vector<int>& preds, std::size_t n_groups);

}  // namespace fedfair

#endif  // FEDFAIR_FAIRBATCH_HPP_
