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
#include "fedfair/population.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "fedfair/simplex.hpp"

namespace fedfair {

namespace {

constexpr double kEtaClip = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double logit(double p) { return std::log(p / (1.0 - p)); }

// 12-point Gauss-Legendre nodes/weights on [-1, 1] (symmetric halves).
constexpr double kGlX[6] = {0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
                            0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
constexpr double kGlW[6] = {0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                            0.1600783285433462, 0.1069393259953184, 0.0471753363865118};

double gauss_pdf(const Gaussian& g, double x) {
  const double z = (x - g.mu) / g.sigma;
  return std::exp(-0.5 * z * z) / (g.sigma * std::sqrt(2.0 * M_PI));
}

// integral of fn(x) * pdf(x) over [lo, hi] by composite Gauss-Legendre.
// Panel width tracks the smaller of the density scale and the link scale.
double gauss_expect(const Gaussian& g, double lo, double hi,
                    const std::function<double(double)>& fn) {
  lo = std::max(lo, g.mu - 9.0 * g.sigma);
  hi = std::min(hi, g.mu + 9.0 * g.sigma);
  if (lo >= hi) return 0.0;
  double width = std::min(0.5, g.sigma / 2.0);
  width = std::max(width, (hi - lo) / 4096.0);
  const std::size_t panels = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  const double h = (hi - lo) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = lo + h * static_cast<double>(p);
    const double mid = a + 0.5 * h;
    const double half = 0.5 * h;
    double acc = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double xp = mid + half * kGlX[k];
      const double xm = mid - half * kGlX[k];
      acc += kGlW[k] * (fn(xp) * gauss_pdf(g, xp) + fn(xm) * gauss_pdf(g, xm));
    }
    total += acc * half;
  }
  return total;
}

double mixture_expect(const GroupMixture& gm, double lo, double hi,
                      const std::function<double(double)>& fn) {
  double s = 0.0;
  for (std::size_t k = 0; k < gm.comp.size(); ++k) {
    s += gm.w[k] * gauss_expect(gm.comp[k], lo, hi, fn);
  }
  return s;
}

void check_dist(const TwoGroupDist& d) {
  if (d.g0.comp.empty() || d.g1.comp.empty()) {
    throw InvalidSpecError("population: empty group mixture");
  }
  if (!(d.q > 0.0) || !(d.q < 1.0)) {
    throw InvalidSpecError("population: q must lie strictly inside (0,1)");
  }
  for (const auto* gm : {&d.g0, &d.g1}) {
    for (const auto& c : gm->comp) {
      if (!(c.sigma > 0.0)) throw InvalidSpecError("population: sigma must be positive");
    }
  }
}

double lambda_range(double q) { return std::max(q, 1.0 - q); }

// Error contribution of one threshold classifier on one client:
// (1-q) * int_{t0} (1-2 eta) dP0 + q * int_{t1} (1-2 eta) dP1.
double signed_error_part(const TwoGroupDist& d, const GroupThresholds& t, const Link& link) {
  auto one_minus_2eta = [&](double x) { return 1.0 - 2.0 * link.eta(x); };
  return (1.0 - d.q) * mixture_expect(d.g0, t.t0, kInf, one_minus_2eta) +
         d.q * mixture_expect(d.g1, t.t1, kInf, one_minus_2eta);
}

double positive_label_rate(const TwoGroupDist& d, const Link& link) {
  auto eta = [&](double x) { return link.eta(x); };
  return (1.0 - d.q) * mixture_expect(d.g0, -kInf, kInf, eta) +
         d.q * mixture_expect(d.g1, -kInf, kInf, eta);
}

// Generic monotone bisection used for aggregated g functions.
double bisect_increasing(const std::function<double(double)>& fn, double lo, double hi,
                         double target, double tol) {
  double flo = fn(lo);
  double fhi = fn(hi);
  if (target < flo - 1e-12 || target > fhi + 1e-12) {
    throw ConvergenceError("invert_g: target outside the attainable range");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = fn(mid);
    if (fm == target) return mid;
    if (fm < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::string method_name_str(TradeoffMethod m) {
  switch (m) {
    case TradeoffMethod::kCfl:
      return "cfl";
    case TradeoffMethod::kLftEnsemble:
      return "lft_ensemble";
    case TradeoffMethod::kLftFedAvg:
      return "lft_fedavg";
  }
  return "unknown";
}

}  // namespace

Link logistic_link() { return Link{&sigmoid, &logit}; }

double GroupMixture::tail(double t) const {
  double s = 0.0;
  for (std::size_t k = 0; k < comp.size(); ++k) {
    s += w[k] * norm_cdf((comp[k].mu - t) / comp[k].sigma);
  }
  return s;
}

TwoGroupDist to_dist(const ClientPopulation& c) {
  TwoGroupDist d;
  d.g0 = GroupMixture{{1.0}, {c.x0}};
  d.g1 = GroupMixture{{1.0}, {c.x1}};
  d.q = c.q;
  return d;
}

TwoGroupDist pool(const PopulationSpec& spec) {
  if (spec.empty()) throw InvalidSpecError("pool: empty spec");
  double sq = 0.0;
  for (const auto& c : spec) {
    if (!(c.q > 0.0) || !(c.q < 1.0)) {
      throw InvalidSpecError("pool: client q must lie strictly inside (0,1)");
    }
    sq += c.q;
  }
  const double n = static_cast<double>(spec.size());
  TwoGroupDist d;
  d.q = sq / n;
  const double s1 = sq;
  const double s0 = n - sq;
  for (const auto& c : spec) {
    d.g0.w.push_back((1.0 - c.q) / s0);
    d.g0.comp.push_back(c.x0);
    d.g1.w.push_back(c.q / s1);
    d.g1.comp.push_back(c.x1);
  }
  return d;
}

GroupThresholds thresholds_for(double lambda, double q, const Link& link) {
  GroupThresholds t;
  double p0 = 0.5 - lambda / (2.0 * (1.0 - q));
  double p1 = 0.5 + lambda / (2.0 * q);
  if (p0 < kEtaClip || p0 > 1.0 - kEtaClip || p1 < kEtaClip || p1 > 1.0 - kEtaClip) {
    t.clipped = true;
    p0 = clamp(p0, kEtaClip, 1.0 - kEtaClip);
    p1 = clamp(p1, kEtaClip, 1.0 - kEtaClip);
  }
  t.t0 = link.eta_inv(p0);
  t.t1 = link.eta_inv(p1);
  return t;
}

double g_value(const TwoGroupDist& dist, double lambda, const Link& link) {
  const GroupThresholds t = thresholds_for(lambda, dist.q, link);
  return dist.g0.tail(t.t0) - dist.g1.tail(t.t1);
}

double invert_g(const TwoGroupDist& dist, double target, double tol, const Link& link) {
  check_dist(dist);
  const double r = lambda_range(dist.q);
  return bisect_increasing([&](double l) { return g_value(dist, l, link); }, -r, r, target, tol);
}

double positive_rate(const GroupMixture& gm, double t) { return gm.tail(t); }

double mixture_accuracy(const TwoGroupDist& dist, const std::vector<GroupThresholds>& members,
                        const Link& link) {
  check_dist(dist);
  if (members.empty()) throw InvalidSpecError("mixture_accuracy: no members");
  double err = 0.0;
  for (const auto& t : members) err += signed_error_part(dist, t, link);
  err /= static_cast<double>(members.size());
  err += positive_label_rate(dist, link);
  return 1.0 - err;
}

double spec_accuracy(const PopulationSpec& spec, const std::vector<GroupThresholds>& members,
                     const Link& link) {
  if (spec.empty()) throw InvalidSpecError("spec_accuracy: empty spec");
  double acc = 0.0;
  for (const auto& c : spec) acc += mixture_accuracy(to_dist(c), members, link);
  return acc / static_cast<double>(spec.size());
}

double spec_dp_disparity(const PopulationSpec& spec, const std::vector<GroupThresholds>& members) {
  if (spec.empty() || members.empty()) {
    throw InvalidSpecError("spec_dp_disparity: empty input");
  }
  double sq = 0.0;
  for (const auto& c : spec) sq += c.q;
  const double s0 = static_cast<double>(spec.size()) - sq;
  if (!(sq > 0.0) || !(s0 > 0.0)) {
    throw InvalidSpecError("spec_dp_disparity: degenerate group shares");
  }
  double rate0 = 0.0;
  double rate1 = 0.0;
  const double inv_m = 1.0 / static_cast<double>(members.size());
  for (const auto& c : spec) {
    const TwoGroupDist d = to_dist(c);
    double r0 = 0.0;
    double r1 = 0.0;
    for (const auto& t : members) {
      r0 += d.g0.tail(t.t0);
      r1 += d.g1.tail(t.t1);
    }
    rate0 += ((1.0 - c.q) / s0) * r0 * inv_m;
    rate1 += (c.q / sq) * r1 * inv_m;
  }
  return std::fabs(rate0 - rate1);
}

CflSolution solve_cfl(const PopulationSpec& spec, double eps, const Link& link) {
  if (!(eps >= 0.0) || !(eps <= 1.0)) {
    throw InvalidSpecError("solve_cfl: eps must lie in [0,1]");
  }
  if (spec.empty()) throw InvalidSpecError("solve_cfl: empty spec");
  bool equal_q = true;
  for (const auto& c : spec) {
    if (c.q != spec.front().q) equal_q = false;
  }
  if (!equal_q && spec.size() != 2) {
    throw UnsupportedError(
        "solve_cfl: pooling clients with different q is supported for two clients only");
  }
  const TwoGroupDist d = pool(spec);
  const double g0 = g_value(d, 0.0, link);
  const double target = static_cast<double>(sign_of(g0)) * std::min(eps, std::fabs(g0));
  CflSolution sol;
  sol.lambda = invert_g(d, target, 1e-9, link);
  sol.t = thresholds_for(sol.lambda, d.q, link);
  sol.dp_disp = std::fabs(g_value(d, sol.lambda, link));
  sol.accuracy = mixture_accuracy(d, {sol.t}, link);
  return sol;
}

LftEnsembleSolution solve_lft_ensemble(const PopulationSpec& spec, const std::vector<double>& eps,
                                       const Link& link) {
  if (spec.empty()) throw InvalidSpecError("solve_lft_ensemble: empty spec");
  if (eps.size() != spec.size()) {
    throw InvalidSpecError("solve_lft_ensemble: one budget per client required");
  }
  LftEnsembleSolution sol;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!(eps[i] >= 0.0) || !(eps[i] <= 1.0)) {
      throw InvalidSpecError("solve_lft_ensemble: eps must lie in [0,1]");
    }
    const TwoGroupDist d = to_dist(spec[i]);
    const double gi0 = g_value(d, 0.0, link);
    const double target = static_cast<double>(sign_of(gi0)) * std::min(eps[i], std::fabs(gi0));
    const double lam = invert_g(d, target, 1e-9, link);
    sol.lambda.push_back(lam);
    sol.members.push_back(thresholds_for(lam, d.q, link));
  }
  sol.dp_disp = spec_dp_disparity(spec, sol.members);
  sol.accuracy = spec_accuracy(spec, sol.members, link);
  return sol;
}

namespace {

// Shared surface machinery for the plain and partitioned ensembles. The two
// aggregate populations enter through their (monotone) group-mean-difference
// functions; J0 and J1 are the client-count shares of the two sides.
struct PsiCore {
  std::function<double(double)> g0;
  std::function<double(double)> g1;
  double range0 = 0.5;
  double range1 = 0.5;
  double j0 = 0.5;
  double j1 = 0.5;

  double g0_at0 = 0.0;
  double g1_at0 = 0.0;
  int s0 = 0;
  int s1 = 0;

  void init() {
    g0_at0 = g0(0.0);
    g1_at0 = g1(0.0);
    s0 = sign_of(g0_at0);
    s1 = sign_of(g1_at0);
  }

  double psi(double e0, double e1) const {
    const double t0 = static_cast<double>(s0) * std::min(e0, std::fabs(g0_at0));
    const double t1 = static_cast<double>(s1) * std::min(e1, std::fabs(g1_at0));
    const double l0 = bisect_increasing(g0, -range0, range0, t0, 1e-9);
    const double l1 = bisect_increasing(g1, -range1, range1, t1, 1e-9);
    return j0 * j1 * (g0(l1) + g1(l0)) + j0 * j0 * t0 + j1 * j1 * t1;
  }
};

DeltaReport delta_core(PsiCore& core, std::size_t grid_n) {
  core.init();
  DeltaReport rep;
  rep.g0_at_zero = core.g0_at0;
  rep.g1_at_zero = core.g1_at0;
  rep.c = std::min(std::fabs(core.g0_at0), std::fabs(core.g1_at0));
  rep.opposite_sign = core.g0_at0 * core.g1_at0 < 0.0;

  const double sum_sign = core.g0_at0 + core.g1_at0;
  const int want = sign_of(sum_sign);
  bool consistent = want != 0;

  if (grid_n < 2 || rep.c == 0.0) grid_n = 1;
  const double step = grid_n > 1 ? rep.c / static_cast<double>(grid_n - 1) : 0.0;
  double best = kInf;
  double be0 = 0.0;
  double be1 = 0.0;
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double e0 = step * static_cast<double>(i);
    for (std::size_t j = 0; j < grid_n; ++j) {
      const double e1 = step * static_cast<double>(j);
      const double p = core.psi(e0, e1);
      if (sign_of(p) != want) consistent = false;
      const double ap = std::fabs(p);
      if (ap < best) {
        best = ap;
        be0 = e0;
        be1 = e1;
      }
    }
  }

  // One local refinement pass: golden-section over each budget coordinate
  // inside the winning grid cell's neighborhood.
  if (grid_n > 1) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int coord = 0; coord < 2; ++coord) {
        double lo = std::max(0.0, (coord == 0 ? be0 : be1) - step);
        double hi = std::min(rep.c, (coord == 0 ? be0 : be1) + step);
        auto eval = [&](double v) {
          return std::fabs(coord == 0 ? core.psi(v, be1) : core.psi(be0, v));
        };
        double x1 = hi - gr * (hi - lo);
        double x2 = lo + gr * (hi - lo);
        double f1 = eval(x1);
        double f2 = eval(x2);
        for (int it = 0; it < 24; ++it) {
          if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = eval(x1);
          } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = eval(x2);
          }
        }
        const double v = 0.5 * (lo + hi);
        const double fv = eval(v);
        if (fv < best) {
          best = fv;
          (coord == 0 ? be0 : be1) = v;
        }
      }
    }
  }

  rep.delta = best;
  rep.eps0 = be0;
  rep.eps1 = be1;
  rep.sign_consistent = consistent;
  return rep;
}

PsiCore make_pair_core(const TwoGroupDist& d0, const TwoGroupDist& d1, const Link& link) {
  PsiCore core;
  core.g0 = [d0, link](double l) { return g_value(d0, l, link); };
  core.g1 = [d1, link](double l) { return g_value(d1, l, link); };
  core.range0 = lambda_range(d0.q);
  core.range1 = lambda_range(d1.q);
  core.j0 = 0.5;
  core.j1 = 0.5;
  return core;
}

}  // namespace

double compute_psi(const PopulationSpec& spec, double eps0, double eps1, const Link& link) {
  if (spec.size() != 2) throw InvalidSpecError("compute_psi: exactly two clients required");
  if (spec[0].q != spec[1].q) {
    throw UnsupportedError("compute_psi: clients must share the sensitive rate q");
  }
  if (!(eps0 >= 0.0) || !(eps1 >= 0.0)) throw InvalidSpecError("compute_psi: budgets must be >= 0");
  PsiCore core = make_pair_core(to_dist(spec[0]), to_dist(spec[1]), link);
  core.init();
  return core.psi(eps0, eps1);
}

DeltaReport compute_delta(const PopulationSpec& spec, std::size_t grid_n, const Link& link) {
  if (spec.size() != 2) throw InvalidSpecError("compute_delta: exactly two clients required");
  if (spec[0].q != spec[1].q) {
    throw UnsupportedError("compute_delta: clients must share the sensitive rate q");
  }
  PsiCore core = make_pair_core(to_dist(spec[0]), to_dist(spec[1]), link);
  return delta_core(core, grid_n);
}

DeltaReport compute_delta_partitioned(const PopulationSpec& spec,
                                      const std::vector<std::size_t>& part0,
                                      const std::vector<std::size_t>& part1, std::size_t grid_n,
                                      const Link& link) {
  if (part0.empty() || part1.empty()) {
    throw InvalidSpecError("compute_delta_partitioned: both parts must be nonempty");
  }
  std::vector<bool> seen(spec.size(), false);
  for (const auto* part : {&part0, &part1}) {
    for (std::size_t idx : *part) {
      if (idx >= spec.size() || seen[idx]) {
        throw InvalidSpecError("compute_delta_partitioned: parts must partition the clients");
      }
      seen[idx] = true;
    }
  }
  if (part0.size() + part1.size() != spec.size()) {
    throw InvalidSpecError("compute_delta_partitioned: parts must cover all clients");
  }

  auto side_fn = [&](const std::vector<std::size_t>& part) {
    std::vector<TwoGroupDist> ds;
    for (std::size_t idx : part) ds.push_back(to_dist(spec[idx]));
    return [ds, link](double l) {
      double s = 0.0;
      for (const auto& d : ds) s += g_value(d, l, link);
      return s / static_cast<double>(ds.size());
    };
  };
  auto side_range = [&](const std::vector<std::size_t>& part) {
    double r = kInf;
    for (std::size_t idx : part) r = std::min(r, lambda_range(spec[idx].q));
    return r;
  };

  PsiCore core;
  core.g0 = side_fn(part0);
  core.g1 = side_fn(part1);
  core.range0 = side_range(part0);
  core.range1 = side_range(part1);
  const double total = static_cast<double>(spec.size());
  core.j0 = static_cast<double>(part0.size()) / total;
  core.j1 = static_cast<double>(part1.size()) / total;
  return delta_core(core, grid_n);
}

namespace {

// Discretized measure shared by the LP and its evaluators.
struct GridModel {
  std::vector<double> centers;
  // mass[i][a*n + k]: P(x in cell k | a, client i)
  std::vector<std::vector<double>> mass;
  std::vector<double> joint;  // P(cell, a) pooled, group-major like f
  std::vector<double> u;      // (1 - 2 eta(center)) * joint
  double p_y1 = 0.0;          // E[eta] under the grid measure
  std::vector<double> w0;     // client share of group 0, Bayes
  std::vector<double> w1;
};

GridModel build_grid(const PopulationSpec& spec, std::size_t grid_n, const Link& link) {
  if (spec.empty()) throw InvalidSpecError("lft_fedavg: empty spec");
  if (grid_n < 8) throw InvalidSpecError("lft_fedavg: grid too small");
  double mu_lo = kInf;
  double mu_hi = -kInf;
  double sigma_max = 0.0;
  for (const auto& c : spec) {
    for (const auto& g : {c.x0, c.x1}) {
      mu_lo = std::min(mu_lo, g.mu);
      mu_hi = std::max(mu_hi, g.mu);
      sigma_max = std::max(sigma_max, g.sigma);
    }
  }
  const double lo = mu_lo - 6.0 * sigma_max;
  const double hi = mu_hi + 6.0 * sigma_max;
  const double h = (hi - lo) / static_cast<double>(grid_n);

  GridModel m;
  const std::size_t icount = spec.size();
  m.centers.resize(grid_n);
  for (std::size_t k = 0; k < grid_n; ++k) {
    m.centers[k] = lo + h * (static_cast<double>(k) + 0.5);
  }
  m.mass.assign(icount, std::vector<double>(2 * grid_n, 0.0));
  for (std::size_t i = 0; i < icount; ++i) {
    for (int a = 0; a < 2; ++a) {
      const Gaussian& g = a == 0 ? spec[i].x0 : spec[i].x1;
      for (std::size_t k = 0; k < grid_n; ++k) {
        const double e0 = lo + h * static_cast<double>(k);
        const double e1 = e0 + h;
        m.mass[i][static_cast<std::size_t>(a) * grid_n + k] =
            norm_cdf((e1 - g.mu) / g.sigma) - norm_cdf((e0 - g.mu) / g.sigma);
      }
    }
  }

  double sq = 0.0;
  for (const auto& c : spec) sq += c.q;
  const double s0 = static_cast<double>(icount) - sq;
  m.w0.resize(icount);
  m.w1.resize(icount);
  for (std::size_t i = 0; i < icount; ++i) {
    m.w0[i] = (1.0 - spec[i].q) / s0;
    m.w1[i] = spec[i].q / sq;
  }

  m.joint.assign(2 * grid_n, 0.0);
  const double inv_i = 1.0 / static_cast<double>(icount);
  for (std::size_t i = 0; i < icount; ++i) {
    for (std::size_t k = 0; k < grid_n; ++k) {
      m.joint[k] += inv_i * (1.0 - spec[i].q) * m.mass[i][k];
      m.joint[grid_n + k] += inv_i * spec[i].q * m.mass[i][grid_n + k];
    }
  }
  m.u.assign(2 * grid_n, 0.0);
  for (std::size_t j = 0; j < 2 * grid_n; ++j) {
    const double x = m.centers[j % grid_n];
    m.u[j] = (1.0 - 2.0 * link.eta(x)) * m.joint[j];
    m.p_y1 += link.eta(x) * m.joint[j];
  }
  return m;
}

GridEval eval_on_grid(const GridModel& m, const PopulationSpec& spec,
                      const std::vector<double>& f) {
  const std::size_t grid_n = m.centers.size();
  if (f.size() != 2 * grid_n) throw InvalidSpecError("grid eval: classifier size mismatch");
  GridEval ev;
  for (std::size_t j = 0; j < 2 * grid_n; ++j) ev.objective += m.u[j] * f[j];
  ev.accuracy = 1.0 - (ev.objective + m.p_y1);
  double rate0 = 0.0;
  double rate1 = 0.0;
  ev.local_dp_disp.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    double r0 = 0.0;
    double r1 = 0.0;
    for (std::size_t k = 0; k < grid_n; ++k) {
      r0 += m.mass[i][k] * f[k];
      r1 += m.mass[i][grid_n + k] * f[grid_n + k];
    }
    ev.local_dp_disp[i] = r0 - r1;
    rate0 += m.w0[i] * r0;
    rate1 += m.w1[i] * r1;
  }
  ev.global_dp_disp = std::fabs(rate0 - rate1);
  return ev;
}

}  // namespace

LftFedAvgSolution solve_lft_fedavg(const PopulationSpec& spec, const std::vector<double>& eps,
                                   std::size_t grid_n, const Link& link) {
  if (eps.size() != spec.size()) {
    throw InvalidSpecError("solve_lft_fedavg: one budget per client required");
  }
  for (double e : eps) {
    if (!(e >= 0.0) || !(e <= 1.0)) {
      throw InvalidSpecError("solve_lft_fedavg: eps must lie in [0,1]");
    }
  }
  const GridModel m = build_grid(spec, grid_n, link);
  const std::size_t icount = spec.size();
  const std::size_t n = 2 * grid_n;

  LinearProgram lp;
  lp.rows = 2 * icount;
  lp.cols = n;
  lp.a.assign(lp.rows * n, 0.0);
  lp.b.assign(lp.rows, 0.0);
  lp.c = m.u;
  lp.upper.assign(n, 1.0);
  for (std::size_t i = 0; i < icount; ++i) {
    for (std::size_t k = 0; k < grid_n; ++k) {
      const double v0 = m.mass[i][k];
      const double v1 = m.mass[i][grid_n + k];
      lp.a[(2 * i) * n + k] = v0;
      lp.a[(2 * i) * n + grid_n + k] = -v1;
      lp.a[(2 * i + 1) * n + k] = -v0;
      lp.a[(2 * i + 1) * n + grid_n + k] = v1;
    }
    lp.b[2 * i] = eps[i];
    lp.b[2 * i + 1] = eps[i];
  }

  const LpSolution s = solve_lp(lp);

  LftFedAvgSolution sol;
  sol.grid_centers = m.centers;
  sol.f = s.x;
  const GridEval ev = eval_on_grid(m, spec, sol.f);
  sol.objective = ev.objective;
  sol.accuracy = ev.accuracy;
  sol.global_dp_disp = ev.global_dp_disp;
  sol.local_dp_disp.resize(icount);
  for (std::size_t i = 0; i < icount; ++i) sol.local_dp_disp[i] = std::fabs(ev.local_dp_disp[i]);
  return sol;
}

std::vector<double> lft_family_classifier(const PopulationSpec& spec,
                                          const std::vector<double>& lambda, std::size_t grid_n,
                                          const Link& link) {
  if (lambda.size() != spec.size()) {
    throw InvalidSpecError("lft_family_classifier: one tilt per client required");
  }
  const double q = spec.front().q;
  for (const auto& c : spec) {
    if (c.q != q) {
      throw UnsupportedError("lft_family_classifier: clients must share the sensitive rate q");
    }
  }
  const GridModel m = build_grid(spec, grid_n, link);
  const double icount = static_cast<double>(spec.size());
  std::vector<double> f(2 * grid_n, 0.0);
  for (int a = 0; a < 2; ++a) {
    const double tilt_dir = a == 0 ? 1.0 / (1.0 - q) : -1.0 / q;
    for (std::size_t k = 0; k < grid_n; ++k) {
      const double x = m.centers[k];
      double vote = 0.0;
      for (std::size_t i = 0; i < spec.size(); ++i) {
        const double si = 2.0 * link.eta(x) - 1.0 + icount * lambda[i] * tilt_dir;
        vote += si * m.mass[i][static_cast<std::size_t>(a) * grid_n + k];
      }
      // Ties resolve to predicting 0.
      f[static_cast<std::size_t>(a) * grid_n + k] = vote > 0.0 ? 1.0 : 0.0;
    }
  }
  return f;
}

GridEval evaluate_grid_classifier(const PopulationSpec& spec, const std::vector<double>& f,
                                  std::size_t grid_n, const Link& link) {
  const GridModel m = build_grid(spec, grid_n, link);
  return eval_on_grid(m, spec, f);
}

std::vector<CurvePoint> tradeoff_curve(const PopulationSpec& spec, TradeoffMethod method,
                                       const std::vector<double>& eps_grid, std::size_t lp_grid_n,
                                       const Link& link) {
  if (eps_grid.empty()) throw InvalidSpecError("tradeoff_curve: empty eps grid");
  std::vector<CurvePoint> curve;
  const std::string name = method_name_str(method);

  if (method == TradeoffMethod::kCfl) {
    for (double e : eps_grid) {
      const CflSolution s = solve_cfl(spec, e, link);
      curve.push_back({name, e, s.accuracy, s.dp_disp});
    }
    return curve;
  }

  if (method == TradeoffMethod::kLftFedAvg) {
    for (double e : eps_grid) {
      const LftFedAvgSolution s =
          solve_lft_fedavg(spec, std::vector<double>(spec.size(), e), lp_grid_n, link);
      curve.push_back({name, e, s.accuracy, s.global_dp_disp});
    }
    return curve;
  }

  // Local-ensemble sweep: budgets run over the full product grid; feasible
  // combinations are then bucketed per requested global budget.
  const std::size_t icount = spec.size();
  if (icount > 3) {
    throw UnsupportedError("tradeoff_curve: ensemble budget sweep supports up to 3 clients");
  }
  const std::size_t gsz = eps_grid.size();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < icount; ++i) combos *= gsz;

  struct Entry {
    double disp;
    double acc;
  };
  std::vector<Entry> entries;
  entries.reserve(combos);
  // Member thresholds depend only on (client, grid index); cache them along
  // with their per-client error and rate contributions.
  std::vector<std::vector<GroupThresholds>> member(icount, std::vector<GroupThresholds>(gsz));
  for (std::size_t j = 0; j < icount; ++j) {
    const TwoGroupDist d = to_dist(spec[j]);
    const double gj0 = g_value(d, 0.0, link);
    for (std::size_t gi = 0; gi < gsz; ++gi) {
      const double e = eps_grid[gi];
      if (!(e >= 0.0) || !(e <= 1.0)) {
        throw InvalidSpecError("tradeoff_curve: eps must lie in [0,1]");
      }
      const double target = static_cast<double>(sign_of(gj0)) * std::min(e, std::fabs(gj0));
      member[j][gi] = thresholds_for(invert_g(d, target, 1e-9, link), d.q, link);
    }
  }
  std::vector<std::size_t> pick(icount, 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c;
    for (std::size_t j = 0; j < icount; ++j) {
      pick[j] = rem % gsz;
      rem /= gsz;
    }
    std::vector<GroupThresholds> members;
    members.reserve(icount);
    for (std::size_t j = 0; j < icount; ++j) members.push_back(member[j][pick[j]]);
    entries.push_back({spec_dp_disparity(spec, members), spec_accuracy(spec, members, link)});
  }
  for (double e : eps_grid) {
    const Entry* best = nullptr;
    for (const auto& en : entries) {
      if (en.disp <= e + 1e-12 && (best == nullptr || en.acc > best->acc)) best = &en;
    }
    if (best != nullptr) curve.push_back({name, e, best->acc, best->disp});
  }
  return curve;
}

const char* tradeoff_method_name(TradeoffMethod m) {
  switch (m) {
    case TradeoffMethod::kCfl:
      return "cfl";
    case TradeoffMethod::kLftEnsemble:
      return "lft_ensemble";
    case TradeoffMethod::kLftFedAvg:
      return "lft_fedavg";
  }
  return "unknown";
}

}  // namespace fedfair
