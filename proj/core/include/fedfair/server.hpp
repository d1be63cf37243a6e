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
#ifndef FEDFAIR_SERVER_HPP_
#define FEDFAIR_SERVER_HPP_

// Server-side view of the federation: aggregate counts, model parameters,
// and statistic payloads. This translation unit deliberately has no access
// to raw samples; keep dataset types out of it.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/fairbatch.hpp"
#include "fedfair/model.hpp"

namespace fedfair {

// Uniform scalar quantizer with 2^bits levels including both endpoints.
// bits = 0 means transmission at full precision (64 bits per value).
// Values outside [lo, hi] are clipped to the range first.
struct Quantizer {
  int bits = 0;
  double lo = 0.0;
  double hi = 2.0;
};

void validate_quantizer(const Quantizer& q);
double quantize(const Quantizer& q, double v);

// Bits needed to ship `n_stats` statistic values under the quantizer.
std::size_t payload_bits(const Quantizer& q, std::size_t n_stats);

// One client-to-server upload: locally trained parameters, the notion's
// statistic payload, and the client's sample count. bit_cost covers the
// stats payload only (parameters are exchanged at full precision).
struct RoundMessage {
  ModelParams params;
  std::vector<double> stats;
  std::int64_t sample_count = 0;
  std::size_t bit_cost = 0;
};

// Simulated secure aggregation: returns the element-wise sum of the
// (quantized) per-client vectors. Takes the values by value and consumes
// them, so per-client inputs are never exposed past this call.
std::vector<double> secagg_sum(std::vector<std::vector<double>> values, const Quantizer& q);

// Sample-count-weighted parameter average: sum_i (n_i / n) params_i.
ModelParams fedavg_aggregate(const std::vector<RoundMessage>& messages);

// Rebuilds the global F-statistics from the round's payloads.
//   kDp:  payloads are local F contributions; the secure sum over-counts the
//         count-ratio term once per client, so (I-1) copies are subtracted.
//   kEo:  payloads are count-weighted partial means of the label-1 cell
//         losses; the secure sum is the global per-cell mean loss.
//   kEod: same for all four cells, label-major.
//   kCp:  each client reports its own mean loss, read individually.
FStatistics reconstruct_stats(Notion notion, const std::vector<RoundMessage>& messages,
                              const Quantizer& q, const GroupCounts& global_counts);

// Server state for the fair outer iteration: global counts assembled from
// per-client tables plus the single-writer lambda weights.
struct FairnessServer {
  Notion notion = Notion::kDp;
  GroupCounts counts;
  LambdaWeights lambda;
  double alpha = 0.1;

  // Merges the per-client count tables (id order) and initializes lambda.
  static FairnessServer create(Notion notion, const std::vector<GroupCounts>& per_client,
                               double alpha);

  // One aggregation step: reconstructs the statistics and, when update is
  // set, applies the projected ascent step to lambda. Returns the
  // reconstructed statistics for logging. step_size overrides the stored
  // alpha when positive; callers running a decaying schedule pass the
  // current round's value here.
  FStatistics step(const std::vector<RoundMessage>& messages, const Quantizer& q, bool update,
                   double step_size = 0.0);
};

}  // namespace fedfair

#endif  // FEDFAIR_SERVER_HPP_
