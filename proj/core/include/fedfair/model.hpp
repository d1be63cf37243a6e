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
#ifndef FEDFAIR_MODEL_HPP_
#define FEDFAIR_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair {

// The two classifier shapes: plain logistic regression and a fixed
// one-hidden-layer ReLU net with four hidden units and a sigmoid output.
enum class ModelKind { kLogistic, kMlp4 };

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Flat parameter vector. Logistic: [w(d), b]. Mlp4: [W (4 rows of d,
// row-major), c(4), v(4), b], total 4d + 9.
struct ModelParams {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t dim = 0;  // feature dimension d
  std::vector<double> theta;
};

std::size_t param_count(ModelKind kind, std::size_t d);
ModelParams zero_params(ModelKind kind, std::size_t d);

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, seeded.
ModelParams init_params(ModelKind kind, std::size_t d, std::uint64_t seed);

// Predicted probability for one sample (x points at d contiguous features).
// The output is clipped to [1e-7, 1 - 1e-7] so the loss stays finite.
double forward(const ModelParams& params, const double* x);

// Probabilities for a row-major n x d feature block.
std::vector<double> predict(const ModelParams& params, const std::vector<double>& features,
                            std::size_t n);

// Cross-entropy of a single (already clipped) probability against a 0/1 label.
double bce_loss(double p, int y);

// Weighted loss sum_i w_i * bce(forward(x_i), y_i) and its exact gradient by
// backpropagation. Samples whose raw sigmoid output lies outside the clip
// range contribute zero gradient (the clipped loss is flat there).
double weighted_loss(const ModelParams& params, const std::vector<double>& features,
                     const std::vector<int>& labels, const std::vector<double>& weights);
std::vector<double> weighted_grad(const ModelParams& params, const std::vector<double>& features,
                                  const std::vector<int>& labels,
                                  const std::vector<double>& weights);

// Shared hyperparameters. learning_rate/batch_size/local_epochs/seed drive
// local training; rounds and alpha drive the outer federated loop.
struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t batch_size = 128;
  std::size_t local_epochs = 30;
  std::size_t rounds = 10;
  double alpha = 0.1;
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

// Mini-batch SGD on the weighted loss: per epoch, a seeded shuffle of the
// sample order, then parameter steps of learning_rate times the batch-mean
// weighted gradient. local_epochs = 0 returns the parameters unchanged.
// Deterministic for a fixed config.seed.
ModelParams sgd_train(ModelParams params, const std::vector<double>& features,
                      const std::vector<int>& labels, const std::vector<double>& weights,
                      const TrainConfig& config);

// Checkpoint format: 16-byte header (magic "FFP1", kind, d, count as
// little-endian 32-bit words) followed by count little-endian binary64
// values.
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace fedfair

#endif  // FEDFAIR_MODEL_HPP_
