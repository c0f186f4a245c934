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

#include <gtest/gtest.h>

#include <cmath>

#include "cotraj/metrics.hpp"
#include "cotraj/rng.hpp"

namespace cotraj {
namespace {

std::vector<Vec2> constant(Vec2 p, std::size_t n) { return std::vector<Vec2>(n, p); }

PredictionCase random_case(Rng& rng, std::size_t K, std::size_t T) {
  PredictionCase c;
  c.scenario_id = "s" + std::to_string(rng.integer(0, 50));
  c.track_id = "t";
  for (std::size_t t = 0; t < T; ++t) {
    c.truth.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20)});
    c.valid.push_back(rng.bernoulli(0.85));
  }
  c.valid[rng.integer(0, static_cast<long>(T) - 1)] = true;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<Vec2> m;
    for (std::size_t t = 0; t < T; ++t)
      m.push_back(c.truth[t] + Vec2{rng.uniform(-4, 4), rng.uniform(-4, 4)});
    c.modes.push_back(m);
  }
  c.agent_count = static_cast<std::size_t>(rng.integer(0, 700));
  return c;
}

// Plain-loop references over raw coordinates.
double ref_min_ade(const PredictionCase& c) {
  double best = 1e300;
  for (const auto& m : c.modes) {
    double s = 0;
    int n = 0;
    for (std::size_t t = 0; t < c.truth.size(); ++t)
      if (c.valid[t]) {
        const double dx = m[t].x - c.truth[t].x, dy = m[t].y - c.truth[t].y;
        s += std::sqrt(dx * dx + dy * dy);
        ++n;
      }
    best = std::min(best, s / n);
  }
  return best;
}

double ref_min_fde(const PredictionCase& c) {
  long last = -1;
  for (std::size_t t = 0; t < c.valid.size(); ++t)
    if (c.valid[t]) last = static_cast<long>(t);
  double best = 1e300;
  for (const auto& m : c.modes) {
    const double dx = m[last].x - c.truth[last].x, dy = m[last].y - c.truth[last].y;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

TEST(MinAde, HandCases) {
  const auto truth = constant({0, 0}, 10);
  EXPECT_EQ(min_ade({truth}, truth), 0.0);
  EXPECT_EQ(min_ade({constant({3, 4}, 10)}, truth), 5.0);
}

TEST(MinFde, HandCases) {
  const auto truth = constant({0, 0}, 5);
  EXPECT_EQ(min_fde({truth}, truth), 0.0);
  Modes modes;
  for (double off : {2.5, 1.0, 7.0, 3.0, 4.0, 9.0}) {
    auto m = truth;
    m.back() = {0, off};
    modes.push_back(m);
  }
  EXPECT_EQ(min_fde(modes, truth), 1.0);
}

TEST(MinFde, UsesLastValidFrame) {
  const auto truth = constant({0, 0}, 4);
  auto m = truth;
  m[2] = {0, 3};
  m[3] = {0, 100};
  EXPECT_EQ(min_fde({m}, truth, {true, true, true, false}), 3.0);
  EXPECT_EQ(min_ade({m}, truth, {false, false, true, false}), 3.0);
}

TEST(Metrics, Errors) {
  const auto truth = constant({0, 0}, 3);
  EXPECT_THROW(min_ade({}, truth), DataError);
  EXPECT_THROW(min_ade({truth}, truth, {false, false, false}), DataError);
  EXPECT_THROW(min_ade({constant({0, 0}, 2)}, truth), DataError);
  EXPECT_THROW(min_fde({truth}, {}), DataError);
  EXPECT_THROW(miss_rate({}), DataError);
}

TEST(MissRate, HandCases) {
  std::vector<PredictionCase> batch;
  for (double off : {0.0, 3.0, 1.0, 2.0}) {
    PredictionCase c;
    c.truth = constant({0, 0}, 3);
    c.valid.assign(3, true);
    auto m = c.truth;
    m.back() = {off, 0};
    c.modes = {m};
    batch.push_back(c);
  }
  EXPECT_EQ(miss_rate(batch), 0.25);  // exactly 2 m is not a miss
  for (auto& c : batch) c.modes = {c.truth};
  EXPECT_EQ(miss_rate(batch), 0.0);
}

TEST(MissRate, TenCaseTally) {
  const double best[10] = {0.5, 2.5, 1.9, 4.0, 2.01, 0.0, 3.3, 1.0, 2.0, 7.0};
  std::vector<PredictionCase> batch;
  for (double b : best) {
    PredictionCase c;
    c.truth = constant({1, 1}, 2);
    c.valid.assign(2, true);
    for (double extra : {0.0, 5.0, 1.0}) {
      auto m = c.truth;
      m.back() = m.back() + Vec2{0, b + extra};
      c.modes.push_back(m);
    }
    batch.push_back(c);
  }
  EXPECT_DOUBLE_EQ(miss_rate(batch), 0.5);
  // Literal per-mode reading: share of modes over 2 m, averaged.
  double literal = 0;
  for (double b : best) literal += ((b > 2) + (b + 5 > 2) + (b + 1 > 2)) / 3.0;
  EXPECT_NEAR(miss_rate(batch, MissRateMode::literal), literal / 10, 1e-15);
}

TEST(Metrics, MatchScalarOracleOnRandomCases) {
  Rng rng(3);
  std::vector<PredictionCase> batch;
  for (int i = 0; i < 1000; ++i) batch.push_back(random_case(rng, 6, 30));
  int misses = 0;
  for (const auto& c : batch) {
    EXPECT_NEAR(min_ade(c.modes, c.truth, c.valid), ref_min_ade(c), 1e-12);
    EXPECT_NEAR(min_fde(c.modes, c.truth, c.valid), ref_min_fde(c), 1e-12);
    misses += ref_min_fde(c) > 2.0;
  }
  EXPECT_NEAR(miss_rate(batch), misses / 1000.0, 1e-12);
}

TEST(Metrics, AddingAHypothesisNeverHurts) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    auto c = random_case(rng, 3, 12);
    const double a = min_ade(c.modes, c.truth, c.valid), f = min_fde(c.modes, c.truth, c.valid);
    EXPECT_GE(a, 0.0);
    c.modes.push_back(random_case(rng, 1, 12).modes[0]);
    EXPECT_LE(min_ade(c.modes, c.truth, c.valid), a);
    EXPECT_LE(min_fde(c.modes, c.truth, c.valid), f);
  }
}

TEST(Metrics, MinFdeBoundedByWorstMode) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto c = random_case(rng, 6, 10);
    double worst = 0;
    for (const auto& m : c.modes) worst = std::max(worst, fde(m, c.truth, c.valid));
    EXPECT_LE(min_fde(c.modes, c.truth, c.valid), worst);
  }
}

TEST(Buckets, AssignmentAndEmptyBuckets) {
  Rng rng(6);
  std::vector<PredictionCase> one;
  for (int i = 0; i < 5; ++i) {
    auto c = random_case(rng, 6, 8);
    c.agent_count = 20;
    one.push_back(c);
  }
  const auto r = evaluate_cases(one);
  ASSERT_EQ(r.buckets.size(), 6u);
  EXPECT_EQ(r.buckets[0].n, 5u);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_EQ(r.buckets[k].n, 0u);
  EXPECT_EQ(r.bucket_ade_variance, 0.0);
  EXPECT_EQ(r.buckets[0].label(), "0-190");
  EXPECT_EQ(r.buckets[5].label(), "590-");

  std::vector<PredictionCase> spread;
  for (std::size_t n : {5u, 189u, 190u, 300u, 389u, 595u, 10000u}) {
    auto c = random_case(rng, 6, 8);
    c.agent_count = n;
    spread.push_back(c);
  }
  const auto s = evaluate_cases(spread);
  const std::size_t want[6] = {2, 1, 2, 0, 0, 2};
  std::size_t total = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(s.buckets[k].n, want[k]) << k;
    total += s.buckets[k].n;
  }
  EXPECT_EQ(total, s.n_cases);
  EXPECT_GT(s.bucket_ade_variance, 0.0);
}

TEST(Buckets, AggregatesMatchManualMeans) {
  Rng rng(7);
  std::vector<PredictionCase> batch;
  for (int i = 0; i < 50; ++i) batch.push_back(random_case(rng, 6, 20));
  const auto r = evaluate_cases(batch);
  double a = 0, f = 0;
  for (const auto& c : batch) a += ref_min_ade(c), f += ref_min_fde(c);
  EXPECT_NEAR(r.min_ade, a / 50, 1e-12);
  EXPECT_NEAR(r.min_fde, f / 50, 1e-12);
  EXPECT_GE(r.miss_rate, 0.0);
  EXPECT_LE(r.miss_rate, 1.0);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["n_cases"], 50);
  EXPECT_EQ(j["buckets"].size(), 6u);
  double weighted = 0;
  for (const auto& b : r.buckets) weighted += b.n ? b.min_ade * double(b.n) : 0.0;
  EXPECT_NEAR(weighted / 50, r.min_ade, 1e-12);
}

}  // namespace
}  // namespace cotraj
