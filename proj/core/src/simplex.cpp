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
#include "fedfair/simplex.hpp"

#include <cmath>

namespace fedfair {

namespace {

constexpr double kTol = 1e-9;

enum class VarState { kAtLower, kAtUpper, kBasic };

}  // namespace

// The program is solved in standard form with one slack per row:
// columns [0, cols) are the structural variables, [cols, cols+rows) slacks.
// The initial basis is the slack identity, feasible because b >= 0.
LpSolution solve_lp(const LinearProgram& lp) {
  const std::size_t m = lp.rows;
  const std::size_t n = lp.cols;
  if (lp.a.size() != m * n || lp.b.size() != m || lp.c.size() != n || lp.upper.size() != n) {
    throw InvalidSpecError("solve_lp: inconsistent program dimensions");
  }
  for (double bi : lp.b) {
    if (!(bi >= 0.0)) throw InvalidSpecError("solve_lp: requires b >= 0");
  }

  const std::size_t total = n + m;
  auto col_entry = [&](std::size_t row, std::size_t j) -> double {
    if (j < n) return lp.a[row * n + j];
    return j - n == row ? 1.0 : 0.0;
  };
  auto upper_of = [&](std::size_t j) -> double {
    return j < n ? lp.upper[j] : LinearProgram::kInf;
  };
  auto cost_of = [&](std::size_t j) -> double { return j < n ? lp.c[j] : 0.0; };

  std::vector<VarState> state(total, VarState::kAtLower);
  std::vector<double> value(total, 0.0);  // current value of every variable
  std::vector<std::size_t> basis(m);
  std::vector<double> binv(m * m, 0.0);  // dense basis inverse
  for (std::size_t i = 0; i < m; ++i) {
    basis[i] = n + i;
    state[n + i] = VarState::kBasic;
    value[n + i] = lp.b[i];
    binv[i * m + i] = 1.0;
  }

  std::vector<double> y(m), d(m), acol(m);
  const std::size_t max_iters = 60 * (total + 4);

  for (std::size_t iter = 0;; ++iter) {
    if (iter > max_iters) throw ConvergenceError("solve_lp: iteration cap exceeded");

    // Simplex multipliers y = c_B' * Binv.
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += cost_of(basis[r]) * binv[r * m + i];
      y[i] = s;
    }

    // Entering variable: Bland's rule over reduced costs.
    std::size_t enter = total;
    int enter_dir = 0;  // +1 increase from lower, -1 decrease from upper
    for (std::size_t j = 0; j < total; ++j) {
      if (state[j] == VarState::kBasic) continue;
      double rc = cost_of(j);
      for (std::size_t i = 0; i < m; ++i) {
        const double aij = col_entry(i, j);
        if (aij != 0.0) rc -= y[i] * aij;
      }
      if (state[j] == VarState::kAtLower && rc < -kTol) {
        enter = j;
        enter_dir = 1;
        break;
      }
      if (state[j] == VarState::kAtUpper && rc > kTol) {
        enter = j;
        enter_dir = -1;
        break;
      }
    }
    if (enter == total) break;  // optimal

    // Direction of basic values as the entering variable moves by +1
    // (times enter_dir): x_B -= enter_dir * Binv * A_enter.
    for (std::size_t i = 0; i < m; ++i) acol[i] = col_entry(i, enter);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += binv[i * m + r] * acol[r];
      d[i] = s;
    }

    // Ratio test: basic variables hitting a bound, or the entering variable
    // reaching its own opposite bound. Bland tie-break on variable index.
    double step = upper_of(enter);  // bound-flip distance (may be +inf)
    std::size_t leave_row = m;      // m means bound flip
    for (std::size_t i = 0; i < m; ++i) {
      const double delta = static_cast<double>(enter_dir) * d[i];
      const std::size_t bj = basis[i];
      double limit = LinearProgram::kInf;
      if (delta > kTol) {
        limit = value[bj] / delta;  // driven to lower bound 0
      } else if (delta < -kTol && std::isfinite(upper_of(bj))) {
        limit = (upper_of(bj) - value[bj]) / (-delta);
      }
      if (limit < step - kTol ||
          (limit < step + kTol && leave_row < m && bj < basis[leave_row])) {
        step = limit;
        leave_row = i;
      }
    }
    if (!std::isfinite(step)) throw ConvergenceError("solve_lp: unbounded direction");
    if (step < 0.0) step = 0.0;

    // Apply the move.
    for (std::size_t i = 0; i < m; ++i) {
      value[basis[i]] -= static_cast<double>(enter_dir) * d[i] * step;
    }
    value[enter] = (enter_dir == 1) ? value[enter] + step : value[enter] - step;

    if (leave_row == m) {
      // Bound flip, basis unchanged.
      state[enter] = (enter_dir == 1) ? VarState::kAtUpper : VarState::kAtLower;
      continue;
    }

    const std::size_t leave = basis[leave_row];
    const double dl = static_cast<double>(enter_dir) * d[leave_row];
    state[leave] = dl > 0.0 ? VarState::kAtLower : VarState::kAtUpper;
    value[leave] = dl > 0.0 ? 0.0 : upper_of(leave);
    basis[leave_row] = enter;
    state[enter] = VarState::kBasic;

    // Pivot Binv so it inverts the new basis.
    const double piv = d[leave_row];
    if (std::fabs(piv) < 1e-12) throw ConvergenceError("solve_lp: degenerate pivot");
    for (std::size_t cidx = 0; cidx < m; ++cidx) binv[leave_row * m + cidx] /= piv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == leave_row) continue;
      const double factor = d[r];
      if (factor == 0.0) continue;
      for (std::size_t cidx = 0; cidx < m; ++cidx) {
        binv[r * m + cidx] -= factor * binv[leave_row * m + cidx];
      }
    }
    // Keep d consistent for the row we just normalized (not reused after
    // this point, but recomputing value drift guards round-off).
    for (std::size_t i = 0; i < m; ++i) d[i] = 0.0;
  }

  LpSolution sol;
  sol.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) sol.x[j] = value[j];
  double obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) obj += lp.c[j] * sol.x[j];
  sol.objective = obj;
  return sol;
}

}  // namespace fedfair
