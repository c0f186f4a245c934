/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Best-of-K displacement metrics, miss rate, agent-density buckets and the
// efficiency report. A case is one target agent of one scenario; truth
// frames flagged invalid are skipped.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotraj/common.hpp"

namespace cotraj {

using Modes = std::vector<std::vector<Vec2>>;  // [K][horizon]

struct PredictionCase {
  std::string scenario_id;
  std::string track_id;
  Modes modes;
  std::vector<Vec2> truth;
  std::vector<bool> valid;
  std::size_t agent_count = 0;  // scenario density for bucketing
};

namespace metrics_detail {

inline void check(const Modes& modes, const std::vector<Vec2>& truth,
                  const std::vector<bool>& valid) {
  if (modes.empty()) throw DataError("metrics: no hypotheses");
  if (valid.size() != truth.size()) throw DataError("metrics: mask length mismatch");
  if (std::find(valid.begin(), valid.end(), true) == valid.end())
    throw DataError("metrics: truth has no valid frame");
  for (const auto& m : modes)
    if (m.size() != truth.size()) throw DataError("metrics: hypothesis length mismatch");
}

inline std::size_t last_valid(const std::vector<bool>& valid) {
  std::size_t t = valid.size();
  while (!valid[t - 1]) --t;
  return t - 1;
}

}  // namespace metrics_detail

inline double ade(const std::vector<Vec2>& mode, const std::vector<Vec2>& truth,
                  const std::vector<bool>& valid) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!valid[t]) continue;
    s += (mode[t] - truth[t]).norm();
    ++n;
  }
  return s / static_cast<double>(n);
}

inline double fde(const std::vector<Vec2>& mode, const std::vector<Vec2>& truth,
                  const std::vector<bool>& valid) {
  const std::size_t t = metrics_detail::last_valid(valid);
  return (mode[t] - truth[t]).norm();
}

inline double min_ade(const Modes& modes, const std::vector<Vec2>& truth,
                      const std::vector<bool>& valid) {
  metrics_detail::check(modes, truth, valid);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) best = std::min(best, ade(m, truth, valid));
  return best;
}

inline double min_fde(const Modes& modes, const std::vector<Vec2>& truth,
                      const std::vector<bool>& valid) {
  metrics_detail::check(modes, truth, valid);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : modes) best = std::min(best, fde(m, truth, valid));
  return best;
}

inline double min_ade(const Modes& modes, const std::vector<Vec2>& truth) {
  return min_ade(modes, truth, std::vector<bool>(truth.size(), true));
}
inline double min_fde(const Modes& modes, const std::vector<Vec2>& truth) {
  return min_fde(modes, truth, std::vector<bool>(truth.size(), true));
}

enum class MissRateMode {
  best_of_k,  // share of cases whose best final error exceeds the threshold
  literal,    // per case, share of modes over the threshold, then averaged
};

inline double miss_rate(const std::vector<PredictionCase>& batch,
                        MissRateMode mode = MissRateMode::best_of_k, double threshold = 2.0) {
  if (batch.empty()) throw DataError("miss_rate: empty batch");
  double total = 0.0;
  for (const auto& c : batch) {
    metrics_detail::check(c.modes, c.truth, c.valid);
    if (mode == MissRateMode::best_of_k) {
      total += min_fde(c.modes, c.truth, c.valid) > threshold ? 1.0 : 0.0;
    } else {
      double over = 0.0;
      for (const auto& m : c.modes) over += fde(m, c.truth, c.valid) > threshold ? 1.0 : 0.0;
      total += over / static_cast<double>(c.modes.size());
    }
  }
  return total / static_cast<double>(batch.size());
}

struct BucketReport {
  std::size_t lo = 0;
  std::optional<std::size_t> hi;  // exclusive, empty = open-ended
  std::size_t n = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;

  std::string label() const {
    return std::to_string(lo) + "-" + (hi ? std::to_string(*hi) : std::string());
  }
};

struct MetricReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  double miss_rate_literal = 0.0;
  std::size_t n_cases = 0;
  std::size_t n_scenarios = 0;
  std::vector<BucketReport> buckets;
  double bucket_ade_variance = 0.0;  // over non-empty buckets
};

// Agent-count bucket edges of the density study: 0-190, ..., 590-.
inline std::vector<std::size_t> density_bucket_edges() { return {0, 190, 290, 390, 490, 590}; }

inline MetricReport evaluate_cases(const std::vector<PredictionCase>& cases,
                                   const std::vector<std::size_t>& edges = density_bucket_edges()) {
  MetricReport r;
  std::vector<std::string> scenarios;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    BucketReport b;
    b.lo = edges[i];
    if (i + 1 < edges.size()) b.hi = edges[i + 1];
    r.buckets.push_back(b);
  }
  std::vector<std::vector<PredictionCase>> per(edges.size());
  for (const auto& c : cases) {
    const double a = min_ade(c.modes, c.truth, c.valid);
    const double f = min_fde(c.modes, c.truth, c.valid);
    r.min_ade += a;
    r.min_fde += f;
    scenarios.push_back(c.scenario_id);
    std::size_t k = 0;
    while (k + 1 < edges.size() && c.agent_count >= edges[k + 1]) ++k;
    auto& b = r.buckets[k];
    ++b.n;
    b.min_ade += a;
    b.min_fde += f;
    per[k].push_back(c);
  }
  r.n_cases = cases.size();
  std::sort(scenarios.begin(), scenarios.end());
  r.n_scenarios = static_cast<std::size_t>(
      std::unique(scenarios.begin(), scenarios.end()) - scenarios.begin());
  if (cases.empty()) return r;
  r.min_ade /= static_cast<double>(cases.size());
  r.min_fde /= static_cast<double>(cases.size());
  r.miss_rate = miss_rate(cases);
  r.miss_rate_literal = miss_rate(cases, MissRateMode::literal);
  double mean = 0.0, used = 0.0;
  for (std::size_t k = 0; k < r.buckets.size(); ++k) {
    auto& b = r.buckets[k];
    if (b.n == 0) continue;
    b.min_ade /= static_cast<double>(b.n);
    b.min_fde /= static_cast<double>(b.n);
    b.miss_rate = miss_rate(per[k]);
    mean += b.min_ade;
    used += 1.0;
  }
  mean /= used;
  for (const auto& b : r.buckets)
    if (b.n) r.bucket_ade_variance += (b.min_ade - mean) * (b.min_ade - mean) / used;
  return r;
}

struct EfficiencyReport {
  std::uint64_t map_recomputes = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t edges_with_gating = 0;
  std::uint64_t edges_full = 0;
  double mean_inference_ms = 0.0;
  std::size_t parameters = 0;
};

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["minADE"] = r.min_ade;
  j["minFDE"] = r.min_fde;
  j["MR"] = r.miss_rate;
  j["MR_literal"] = r.miss_rate_literal;
  j["n_cases"] = r.n_cases;
  j["n_scenarios"] = r.n_scenarios;
  auto& bs = j["buckets"] = nlohmann::ordered_json::array();
  for (const auto& b : r.buckets) {
    nlohmann::ordered_json e;
    e["agents"] = b.label();
    e["n"] = b.n;
    if (b.n) {
      e["minADE"] = b.min_ade;
      e["minFDE"] = b.min_fde;
      e["MR"] = b.miss_rate;
    }
    bs.push_back(e);
  }
  j["bucket_minADE_variance"] = r.bucket_ade_variance;
  return j;
}

inline nlohmann::ordered_json efficiency_to_json(const EfficiencyReport& e) {
  return {{"map_recomputes", e.map_recomputes},   {"cache_hits", e.cache_hits},
          {"edges_with_gating", e.edges_with_gating}, {"edges_full", e.edges_full},
          {"mean_inference_ms", e.mean_inference_ms}, {"parameters", e.parameters}};
}

}  // namespace cotraj
