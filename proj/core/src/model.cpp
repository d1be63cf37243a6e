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
#include "fedfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <random>

namespace fedfair {
namespace {

constexpr double kProbClip = 1e-7;
constexpr std::size_t kHidden = 4;

void check_annotations(const ModelParams& params, const std::vector<double>& features,
                       const std::vector<int>& labels, const std::vector<double>& weights) {
  if (params.theta.size() != param_count(params.kind, params.dim)) {
    throw DimensionError("parameter vector length does not match the model shape");
  }
  const std::size_t n = labels.size();
  if (weights.size() != n) {
    throw DimensionError("weights and labels must have the same length");
  }
  if (params.dim == 0 || features.size() != n * params.dim) {
    throw DimensionError("feature block must be n x d with d matching the model");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidSpecError("labels must be 0 or 1");
  }
}

// Raw (unclipped) sigmoid output plus the hidden activations needed for the
// backward pass. pre[u] holds the hidden pre-activation so relu' is exact.
struct ForwardState {
  double p_raw = 0.0;
  std::vector<double> hidden;  // post-relu, mlp only
  std::vector<double> pre;     // pre-relu, mlp only
};

ForwardState run_forward(const ModelParams& params, const double* x) {
  ForwardState st;
  const std::size_t d = params.dim;
  const double* th = params.theta.data();
  double z = 0.0;
  if (params.kind == ModelKind::kLogistic) {
    for (std::size_t j = 0; j < d; ++j) z += th[j] * x[j];
    z += th[d];
  } else {
    st.pre.resize(kHidden);
    st.hidden.resize(kHidden);
    const double* w = th;
    const double* c = th + kHidden * d;
    const double* v = c + kHidden;
    const double b = v[kHidden];
    for (std::size_t u = 0; u < kHidden; ++u) {
      double s = c[u];
      const double* row = w + u * d;
      for (std::size_t j = 0; j < d; ++j) s += row[j] * x[j];
      st.pre[u] = s;
      st.hidden[u] = s > 0.0 ? s : 0.0;
      z += v[u] * st.hidden[u];
    }
    z += b;
  }
  st.p_raw = sigmoid(z);
  return st;
}

std::uint32_t read_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_le32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

std::uint64_t read_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void write_le64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

constexpr char kMagic[4] = {'F', 'F', 'P', '1'};

}  // namespace

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::kLogistic ? "logistic" : "mlp-4";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp-4") return ModelKind::kMlp4;
  throw InvalidSpecError("unknown model kind: " + name);
}

std::size_t param_count(ModelKind kind, std::size_t d) {
  if (d == 0) throw InvalidSpecError("feature dimension must be positive");
  return kind == ModelKind::kLogistic ? d + 1 : 4 * d + 9;
}

ModelParams zero_params(ModelKind kind, std::size_t d) {
  ModelParams p;
  p.kind = kind;
  p.dim = d;
  p.theta.assign(param_count(kind, d), 0.0);
  return p;
}

ModelParams init_params(ModelKind kind, std::size_t d, std::uint64_t seed) {
  ModelParams p = zero_params(kind, d);
  std::mt19937_64 rng(mix_seed(seed));
  auto fill = [&rng](double* dst, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (std::size_t i = 0; i < count; ++i) dst[i] = u(rng);
  };
  if (kind == ModelKind::kLogistic) {
    fill(p.theta.data(), d + 1, d);
  } else {
    fill(p.theta.data(), kHidden * d + kHidden, d);          // W and c
    fill(p.theta.data() + kHidden * d + kHidden, kHidden + 1, kHidden);  // v and b
  }
  return p;
}

double forward(const ModelParams& params, const double* x) {
  ForwardState st = run_forward(params, x);
  return clamp(st.p_raw, kProbClip, 1.0 - kProbClip);
}

std::vector<double> predict(const ModelParams& params, const std::vector<double>& features,
                            std::size_t n) {
  if (params.dim == 0 || features.size() != n * params.dim) {
    throw DimensionError("feature block must be n x d with d matching the model");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = forward(params, features.data() + i * params.dim);
  return out;
}

double bce_loss(double p, int y) {
  if (y != 0 && y != 1) throw InvalidSpecError("labels must be 0 or 1");
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double weighted_loss(const ModelParams& params, const std::vector<double>& features,
                     const std::vector<int>& labels, const std::vector<double>& weights) {
  check_annotations(params, features, labels, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = forward(params, features.data() + i * params.dim);
    total += weights[i] * bce_loss(p, labels[i]);
  }
  return total;
}

std::vector<double> weighted_grad(const ModelParams& params, const std::vector<double>& features,
                                  const std::vector<int>& labels,
                                  const std::vector<double>& weights) {
  check_annotations(params, features, labels, weights);
  const std::size_t d = params.dim;
  std::vector<double> grad(params.theta.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* x = features.data() + i * d;
    ForwardState st = run_forward(params, x);
    // Inside the clip range d(bce)/dz = p - y; a clipped output makes the
    // loss locally constant in the parameters.
    if (st.p_raw <= kProbClip || st.p_raw >= 1.0 - kProbClip) continue;
    const double dz = weights[i] * (st.p_raw - static_cast<double>(labels[i]));
    if (dz == 0.0) continue;
    if (params.kind == ModelKind::kLogistic) {
      for (std::size_t j = 0; j < d; ++j) grad[j] += dz * x[j];
      grad[d] += dz;
    } else {
      const double* v = params.theta.data() + kHidden * d + kHidden;
      double* gw = grad.data();
      double* gc = grad.data() + kHidden * d;
      double* gv = gc + kHidden;
      for (std::size_t u = 0; u < kHidden; ++u) {
        gv[u] += dz * st.hidden[u];
        if (st.pre[u] > 0.0) {
          const double dh = dz * v[u];
          double* row = gw + u * d;
          for (std::size_t j = 0; j < d; ++j) row[j] += dh * x[j];
          gc[u] += dh;
        }
      }
      gv[kHidden] += dz;  // output bias
    }
  }
  return grad;
}

void validate_train_config(const TrainConfig& config) {
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning_rate must be positive and finite");
  }
  if (config.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (config.rounds == 0) throw ConfigError("rounds must be at least 1");
  if (!(config.alpha > 0.0) || !std::isfinite(config.alpha)) {
    throw ConfigError("alpha must be positive and finite");
  }
}

ModelParams sgd_train(ModelParams params, const std::vector<double>& features,
                      const std::vector<int>& labels, const std::vector<double>& weights,
                      const TrainConfig& config) {
  validate_train_config(config);
  check_annotations(params, features, labels, weights);
  const std::size_t n = labels.size();
  if (n == 0 || config.local_epochs == 0) return params;
  const std::size_t d = params.dim;
  std::mt19937_64 rng(mix_seed(config.seed));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> batch_x;
  std::vector<int> batch_y;
  std::vector<double> batch_w;
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(start + config.batch_size, n);
      const std::size_t m = stop - start;
      batch_x.resize(m * d);
      batch_y.resize(m);
      batch_w.resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t src = order[start + k];
        std::copy_n(features.data() + src * d, d, batch_x.data() + k * d);
        batch_y[k] = labels[src];
        batch_w[k] = weights[src];
      }
      const std::vector<double> grad = weighted_grad(params, batch_x, batch_y, batch_w);
      const double scale = config.learning_rate / static_cast<double>(m);
      for (std::size_t j = 0; j < params.theta.size(); ++j) params.theta[j] -= scale * grad[j];
    }
  }
  return params;
}

void save_params(const ModelParams& params, const std::string& path) {
  const std::size_t count = param_count(params.kind, params.dim);
  if (params.theta.size() != count) {
    throw DimensionError("parameter vector length does not match the model shape");
  }
  std::vector<unsigned char> buf(16 + 8 * count);
  std::memcpy(buf.data(), kMagic, 4);
  write_le32(buf.data() + 4, params.kind == ModelKind::kLogistic ? 0u : 1u);
  write_le32(buf.data() + 8, static_cast<std::uint32_t>(params.dim));
  write_le32(buf.data() + 12, static_cast<std::uint32_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &params.theta[i], 8);
    write_le64(buf.data() + 16 + 8 * i, bits);
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw SerializationError("cannot open for writing: " + path);
  const std::size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (written != buf.size()) throw SerializationError("short write: " + path);
}

ModelParams load_params(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) throw SerializationError("cannot open for reading: " + path);
  unsigned char header[16];
  if (std::fread(header, 1, 16, f) != 16) {
    std::fclose(f);
    throw SerializationError("truncated header: " + path);
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    std::fclose(f);
    throw SerializationError("bad magic: " + path);
  }
  const std::uint32_t kind_word = read_le32(header + 4);
  const std::uint32_t d = read_le32(header + 8);
  const std::uint32_t count = read_le32(header + 12);
  if (kind_word > 1) {
    std::fclose(f);
    throw SerializationError("unknown model kind word: " + path);
  }
  ModelParams p;
  p.kind = kind_word == 0 ? ModelKind::kLogistic : ModelKind::kMlp4;
  p.dim = d;
  if (d == 0 || count != param_count(p.kind, d)) {
    std::fclose(f);
    throw SerializationError("parameter count does not match the model shape: " + path);
  }
  std::vector<unsigned char> payload(8 * static_cast<std::size_t>(count));
  if (std::fread(payload.data(), 1, payload.size(), f) != payload.size()) {
    std::fclose(f);
    throw SerializationError("truncated payload: " + path);
  }
  unsigned char extra;
  const bool trailing = std::fread(&extra, 1, 1, f) == 1;
  std::fclose(f);
  if (trailing) throw SerializationError("trailing bytes: " + path);
  p.theta.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = read_le64(payload.data() + 8 * i);
    std::memcpy(&p.theta[i], &bits, 8);
  }
  return p;
}

}  // namespace fedfair
