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
#ifndef FEDFAIR_SIMPLEX_HPP_
#define FEDFAIR_SIMPLEX_HPP_

#include <cstddef>
#include <limits>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair {

// Dense bounded-variable primal simplex for
//   min c'x  s.t.  A x <= b,  0 <= x <= u   (u_j may be +inf)
// with Bland's smallest-index rule throughout, so the solve is deterministic
// and cannot cycle. Sized for problems with few rows and up to a few
// thousand columns. The all-lower-bound point must be feasible (b >= 0),
// which holds for every program built in this codebase.
struct LinearProgram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major rows x cols
  std::vector<double> b;
  std::vector<double> c;
  std::vector<double> upper;  // per-column upper bound, may be +inf

  static constexpr double kInf = std::numeric_limits<double>::infinity();
};

struct LpSolution {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
};

// Throws InvalidSpecError on malformed input (negative b, bad sizes) and
// ConvergenceError if the iteration cap is hit.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace fedfair

#endif  // FEDFAIR_SIMPLEX_HPP_
