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
#include "fedfair/server.hpp"

#include <cmath>

namespace fedfair {
namespace {

// Expected payload length per client for one notion.
std::size_t stats_width(Notion notion, const GroupCounts& counts) {
  switch (notion) {
    case Notion::kDp:
      return counts.groups - 1;
    case Notion::kEo:
      return counts.groups;
    case Notion::kEod:
      return 2 * counts.groups;
    case Notion::kCp:
      return 1;
  }
  return 0;
}

void check_messages(const std::vector<RoundMessage>& messages, std::size_t want_width) {
  if (messages.empty()) throw InvalidSpecError("no round messages");
  for (const RoundMessage& m : messages) {
    if (m.stats.size() != want_width) {
      throw DimensionError("stats payload width does not match the notion");
    }
    for (double v : m.stats) {
      if (!std::isfinite(v)) throw InvalidSpecError("stats payload must be finite");
    }
  }
}

}  // namespace

void validate_quantizer(const Quantizer& q) {
  if (q.bits < 0 || q.bits > 52) {
    throw ConfigError("quantizer bits must lie in [1, 52], or 0 for none");
  }
  if (!(q.lo < q.hi)) throw ConfigError("quantizer range must satisfy lo < hi");
}

double quantize(const Quantizer& q, double v) {
  validate_quantizer(q);
  if (q.bits == 0) return v;
  const double clipped = clamp(v, q.lo, q.hi);
  const double levels = std::ldexp(1.0, q.bits) - 1.0;  // 2^bits - 1 steps
  const double step = (q.hi - q.lo) / levels;
  const double level = std::nearbyint((clipped - q.lo) / step);
  return q.lo + level * step;
}

std::size_t payload_bits(const Quantizer& q, std::size_t n_stats) {
  validate_quantizer(q);
  return n_stats * static_cast<std::size_t>(q.bits == 0 ? 64 : q.bits);
}

std::vector<double> secagg_sum(std::vector<std::vector<double>> values, const Quantizer& q) {
  if (values.empty()) throw InvalidSpecError("secagg_sum: no inputs");
  const std::size_t width = values.front().size();
  std::vector<double> acc(width, 0.0);
  for (std::vector<double>& v : values) {
    if (v.size() != width) throw DimensionError("secagg_sum: input lengths differ");
    for (std::size_t k = 0; k < width; ++k) acc[k] += quantize(q, v[k]);
    v.assign(v.size(), 0.0);  // consume the per-client payload
  }
  return acc;
}

ModelParams fedavg_aggregate(const std::vector<RoundMessage>& messages) {
  if (messages.empty()) throw InvalidSpecError("fedavg_aggregate: no messages");
  const ModelParams& head = messages.front().params;
  double n = 0.0;
  for (const RoundMessage& m : messages) {
    if (m.params.kind != head.kind || m.params.dim != head.dim ||
        m.params.theta.size() != head.theta.size()) {
      throw DimensionError("fedavg_aggregate: model shapes differ");
    }
    if (m.sample_count <= 0) throw InvalidSpecError("fedavg_aggregate: sample_count must be > 0");
    n += static_cast<double>(m.sample_count);
  }
  ModelParams out = zero_params(head.kind, head.dim);
  for (const RoundMessage& m : messages) {
    const double w = static_cast<double>(m.sample_count) / n;
    for (std::size_t j = 0; j < out.theta.size(); ++j) out.theta[j] += w * m.params.theta[j];
  }
  return out;
}

FStatistics reconstruct_stats(Notion notion, const std::vector<RoundMessage>& messages,
                              const Quantizer& q, const GroupCounts& counts) {
  check_messages(messages, stats_width(notion, counts));
  const std::size_t A = counts.groups;
  const double clients = static_cast<double>(messages.size());
  std::vector<std::vector<double>> payloads;
  payloads.reserve(messages.size());
  for (const RoundMessage& m : messages) payloads.push_back(m.stats);

  FStatistics f;
  f.notion = notion;
  switch (notion) {
    case Notion::kDp: {
      std::vector<double> sum = secagg_sum(std::move(payloads), q);
      const double base0 = static_cast<double>(counts.n_ya(0, 0)) /
                           static_cast<double>(counts.n_star_a(0));
      for (std::size_t a = 1; a < A; ++a) {
        const double base_a = static_cast<double>(counts.n_ya(0, a)) /
                              static_cast<double>(counts.n_star_a(a));
        f.values.push_back(sum[a - 1] - (clients - 1.0) * (base0 - base_a));
      }
      return f;
    }
    case Notion::kEo: {
      const std::vector<double> sum = secagg_sum(std::move(payloads), q);
      GroupLossReport report;
      report.groups = A;
      report.clients = counts.clients;
      report.mean_ya.assign(2 * A, 0.0);
      for (std::size_t a = 0; a < A; ++a) report.mean_ya[A + a] = sum[a];
      report.client_mean.assign(counts.clients, 0.0);
      return compute_stats(Notion::kEo, report, counts);
    }
    case Notion::kEod: {
      const std::vector<double> sum = secagg_sum(std::move(payloads), q);
      GroupLossReport report;
      report.groups = A;
      report.clients = counts.clients;
      report.mean_ya = sum;
      report.client_mean.assign(counts.clients, 0.0);
      return compute_stats(Notion::kEod, report, counts);
    }
    case Notion::kCp: {
      if (messages.size() != counts.clients) {
        throw DimensionError("client-parity reconstruction needs one message per client");
      }
      GroupLossReport report;
      report.groups = A;
      report.clients = counts.clients;
      report.mean_ya.assign(2 * A, 0.0);
      report.client_mean.resize(counts.clients);
      for (std::size_t i = 0; i < messages.size(); ++i) {
        report.client_mean[i] = quantize(q, messages[i].stats[0]);
      }
      return compute_stats(Notion::kCp, report, counts);
    }
  }
  throw InvalidSpecError("unknown notion");
}

FairnessServer FairnessServer::create(Notion notion, const std::vector<GroupCounts>& per_client,
                                      double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("alpha must be positive and finite");
  }
  FairnessServer s;
  s.notion = notion;
  s.counts = merge_counts(per_client);
  s.lambda = init_lambda(notion, s.counts);
  s.alpha = alpha;
  return s;
}

FStatistics FairnessServer::step(const std::vector<RoundMessage>& messages, const Quantizer& q,
                                 bool update, double step_size) {
  const FStatistics stats = reconstruct_stats(notion, messages, q, counts);
  const double a = step_size > 0.0 ? step_size : alpha;
  if (update) lambda = update_lambda(lambda, stats, a, counts);
  return stats;
}

}  // namespace fedfair
