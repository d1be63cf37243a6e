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
#ifndef FEDFAIR_POPULATION_HPP_
#define FEDFAIR_POPULATION_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "fedfair/common.hpp"

namespace fedfair {

// Link between the scalar score x and the positive-label probability
// P(y=1|x). Defaults to the logistic link. eta must be strictly increasing.
struct Link {
  double (*eta)(double);
  double (*eta_inv)(double);  // inverse of eta on (0,1)
};

Link logistic_link();

// One-dimensional Gaussian component.
struct Gaussian {
  double mu = 0.0;
  double sigma = 1.0;
};

// Finite Gaussian mixture; weights must be nonnegative and sum to 1.
struct GroupMixture {
  std::vector<double> w;
  std::vector<Gaussian> comp;

  double tail(double t) const;  // P(x > t)
};

// A two-group population: score distributions for sensitive groups a=0 and
// a=1 plus the sensitive rate q = P(a=1). Used both for a single client and
// for pooled multi-client populations.
struct TwoGroupDist {
  GroupMixture g0;
  GroupMixture g1;
  double q = 0.5;
};

// Per-client population: one Gaussian per group and the client's sensitive
// rate. All clients are taken to hold equal data volumes.
struct ClientPopulation {
  Gaussian x0;  // x | a=0
  Gaussian x1;  // x | a=1
  double q = 0.5;
};

using PopulationSpec = std::vector<ClientPopulation>;

TwoGroupDist to_dist(const ClientPopulation& c);

// Pools clients into one population: q is the average sensitive rate and the
// group conditionals are mixtures with Bayes weights (q_i for a=1, 1-q_i for
// a=0, normalized).
TwoGroupDist pool(const PopulationSpec& spec);

// Group-dependent decision thresholds induced by the tilt parameter lambda:
// predict 1 iff x > t0 on group 0, x > t1 on group 1. When the tilted
// probability arguments leave (0,1) they are clipped to
// [1e-12, 1-1e-12] and `clipped` is set.
struct GroupThresholds {
  double t0 = 0.0;
  double t1 = 0.0;
  bool clipped = false;
};

GroupThresholds thresholds_for(double lambda, double q, const Link& link = logistic_link());

// Signed group mean difference of the lambda-tilted threshold classifier:
// P(x > t0(lambda) | a=0) - P(x > t1(lambda) | a=1). Strictly increasing in
// lambda on [-max(q,1-q), max(q,1-q)].
double g_value(const TwoGroupDist& dist, double lambda, const Link& link = logistic_link());

// Inverse of g_value by bisection on the admissible lambda range, to
// absolute tolerance `tol` on lambda. Returns immediately on an exact hit,
// which pins the behavior on numerically flat stretches of g. Throws
// ConvergenceError if the target lies outside [g(lo), g(hi)].
double invert_g(const TwoGroupDist& dist, double target, double tol = 1e-9,
                const Link& link = logistic_link());

// Statistical functionals of (mixtures of) threshold classifiers evaluated
// by Gauss-Legendre quadrature against the Gaussian populations.
//
// A "mixture classifier" averages the hard outputs of several threshold
// classifiers; rates and error are its expected values (no resampling).
double positive_rate(const GroupMixture& gm, double t);

// Classifier accuracy on `dist`: 1 - E[f(x,a)(1-2*eta(x))] - P(y=1), the
// expected 0-1 agreement of the (possibly averaged) classifier.
double mixture_accuracy(const TwoGroupDist& dist,
                        const std::vector<GroupThresholds>& members,
                        const Link& link = logistic_link());

// Same over a multi-client spec: clients weighted equally, rates per group
// weighted by group-conditional client shares.
double spec_accuracy(const PopulationSpec& spec, const std::vector<GroupThresholds>& members,
                     const Link& link = logistic_link());
double spec_dp_disparity(const PopulationSpec& spec, const std::vector<GroupThresholds>& members);

// Centralized fair classifier on the pooled population: the smallest tilt
// whose group mean difference comes within eps of zero (or reaches the
// unconstrained optimum if it is already eps-fair).
struct CflSolution {
  double lambda = 0.0;
  GroupThresholds t;
  double dp_disp = 0.0;
  double accuracy = 0.0;
};

// Throws InvalidSpecError for eps outside [0,1]; UnsupportedError when
// clients disagree on q and the spec has more than two clients (pooling with
// mixed rates is provided for two clients only).
CflSolution solve_cfl(const PopulationSpec& spec, double eps, const Link& link = logistic_link());

// Local-training ensemble: each client solves its own eps_i-budget problem
// on its local population, the ensemble averages the member outputs.
struct LftEnsembleSolution {
  std::vector<double> lambda;
  std::vector<GroupThresholds> members;
  double dp_disp = 0.0;   // of the averaged classifier on the global population
  double accuracy = 0.0;  // idem
};

LftEnsembleSolution solve_lft_ensemble(const PopulationSpec& spec, const std::vector<double>& eps,
                                       const Link& link = logistic_link());

// Two-client ensemble fairness-surface value at local budgets (e0, e1):
// the global mean difference of the budgeted local solutions, averaged over
// the four member/population pairings.
double compute_psi(const PopulationSpec& spec, double eps0, double eps1,
                   const Link& link = logistic_link());

struct DeltaReport {
  double delta = 0.0;     // min |psi| over the budget square [0,c]^2
  double c = 0.0;         // min(|g0(0)|, |g1(0)|)
  double g0_at_zero = 0.0;
  double g1_at_zero = 0.0;
  double eps0 = 0.0;      // argmin budgets
  double eps1 = 0.0;
  bool opposite_sign = false;   // g0(0) and g1(0) strictly opposite in sign
  bool sign_consistent = false; // psi kept the sign of g0(0)+g1(0) on the grid
};

// Minimum achievable global disparity of the two-client local-training
// ensemble, by grid search over the budget square plus one local
// golden-section refinement around the grid argmin.
DeltaReport compute_delta(const PopulationSpec& spec, std::size_t grid_n = 201,
                          const Link& link = logistic_link());

// Partitioned variant: clients are first averaged within the two index
// groups (sizes J0*I and J1*I), then the two aggregate populations play the
// member roles with J-weighted pairings.
DeltaReport compute_delta_partitioned(const PopulationSpec& spec,
                                      const std::vector<std::size_t>& part0,
                                      const std::vector<std::size_t>& part1,
                                      std::size_t grid_n = 201,
                                      const Link& link = logistic_link());

// Discretized global-optimal classifier under per-client disparity budgets.
// The score axis is binned into `grid_n` cells spanning
// [min mu - 6*max sigma, max mu + 6*max sigma]; the classifier is one value
// f(cell, a) in [0,1] per cell and group; the solve is an LP minimizing the
// expected 0-1 error subject to |local mean difference of client i| <= eps_i.
struct LftFedAvgSolution {
  std::vector<double> grid_centers;
  std::vector<double> f;  // size 2*grid_n, group-major: f[a*grid_n + cell]
  double objective = 0.0;
  double accuracy = 0.0;
  double global_dp_disp = 0.0;
  std::vector<double> local_dp_disp;
};

LftFedAvgSolution solve_lft_fedavg(const PopulationSpec& spec, const std::vector<double>& eps,
                                   std::size_t grid_n = 256, const Link& link = logistic_link());

// Closed-form tilt family for the same discretized problem; used to
// cross-check the LP. Returns the 0/1 cell classifier induced by per-client
// tilts lambda_i. Requires all clients to share q.
std::vector<double> lft_family_classifier(const PopulationSpec& spec,
                                          const std::vector<double>& lambda, std::size_t grid_n,
                                          const Link& link = logistic_link());

// Evaluates a discretized cell classifier under the grid measure.
struct GridEval {
  double objective = 0.0;   // E[f(x,a)(1-2 eta(x))] under the grid measure
  double accuracy = 0.0;
  double global_dp_disp = 0.0;
  std::vector<double> local_dp_disp;
};
GridEval evaluate_grid_classifier(const PopulationSpec& spec, const std::vector<double>& f,
                                  std::size_t grid_n, const Link& link = logistic_link());

// Accuracy/fairness tradeoff curves for the three analytic methods.
enum class TradeoffMethod { kCfl, kLftEnsemble, kLftFedAvg };

struct CurvePoint {
  std::string method;
  double epsilon = 0.0;
  double accuracy = 0.0;
  double dp_disp = 0.0;
};

// For kCfl and kLftFedAvg one point per eps (shared across clients). For
// kLftEnsemble the per-client budgets sweep the full eps_grid product and
// each curve point keeps the accuracy-maximal combination whose achieved
// global disparity is within that eps.
std::vector<CurvePoint> tradeoff_curve(const PopulationSpec& spec, TradeoffMethod method,
                                       const std::vector<double>& eps_grid,
                                       std::size_t lp_grid_n = 256,
                                       const Link& link = logistic_link());

const char* tradeoff_method_name(TradeoffMethod m);

}  // namespace fedfair

#endif  // FEDFAIR_POPULATION_HPP_
