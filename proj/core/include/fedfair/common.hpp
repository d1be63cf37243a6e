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
#ifndef FEDFAIR_COMMON_HPP_
#define FEDFAIR_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedfair {

// Error taxonomy. Recoverable conditions (a solver hitting its iteration
// budget) raise ConvergenceError; everything else is a caller bug or bad
// input and is not meant to be caught in normal flow.
struct InvalidSpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnsupportedError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateGroupError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct EmptyClientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSplitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownCategoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SerializationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MissingGroupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CovarianceError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct MissingSummaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Numerically stable logistic sigmoid.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// splitmix64 finalizer. Used to derive statistically independent RNG seeds
// from (base_seed, round, client) tuples so that sequential and centralized
// executions consume identical randomness.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1) + 0xbf58476d1ce4e5b9ULL * (c + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fedfair

#endif  // FEDFAIR_COMMON_HPP_
