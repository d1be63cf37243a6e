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
#ifndef FEDFAIR_METRICS_HPP_
#define FEDFAIR_METRICS_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedfair/common.hpp"
#include "fedfair/data.hpp"
#include "fedfair/model.hpp"

namespace fedfair {

// Probability-valued classifier: receives one feature row and the sample's
// sensitive group, returns P(predict 1).
using Predictor = std::function<double(const double* x, int group)>;

// Positive rates are expected values of the randomized prediction (the mean
// predicted probability), which removes evaluation noise. Accuracy uses the
// 0.5 threshold. Client losses are mean cross-entropy per client.
struct EvalReport {
  double accuracy = 0.0;
  double dp_disp_multi = 0.0;   // max_a |rate_a - overall rate|
  double dp_disp_binary = 0.0;  // max pairwise |rate_a - rate_b|
  double eo_disp = 0.0;         // same shape, restricted to label-1 samples
  double eod_disp = 0.0;        // max over both label values
  double cp_disp = 0.0;         // max pairwise client loss gap
  std::vector<double> group_rates;
  std::vector<double> client_losses;
};

EvalReport evaluate(const Predictor& predictor, const Dataset& ds);
EvalReport evaluate(const ModelParams& params, const Dataset& ds);

// One experiment under one seed, reporting named metric values.
using Experiment = std::function<std::map<std::string, double>(std::uint64_t seed)>;

struct SummaryStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

std::vector<std::uint64_t> default_seeds();  // {0, 1, 2, 3, 4}

// Runs the experiment once per seed and reduces each metric to mean and
// sample standard deviation. Needs at least two seeds.
std::map<std::string, SummaryStat> replicate(const Experiment& experiment,
                                             const std::vector<std::uint64_t>& seeds);

// Compact "mean±std" rendering with three decimals and no leading zero,
// e.g. ".725±.012".
std::string format_stat(const SummaryStat& s);

}  // namespace fedfair

#endif  // FEDFAIR_METRICS_HPP_
