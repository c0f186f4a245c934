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

// Training loop and prediction-versus-truth evaluation helpers.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cotraj/metrics.hpp"
#include "cotraj/model.hpp"

namespace cotraj {

struct EpochStats {
  int epoch = 0;
  LossBreakdown mean;  // averaged over scenes with a valid target
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t steps = 0;
  std::size_t skipped = 0;  // scene visits without any usable target
  double seconds = 0.0;
};

// Learning rate of step `step` out of `total`: cosine decay from the base
// rate to zero.
inline double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total <= 1) return base;
  const double x = static_cast<double>(step) / static_cast<double>(total - 1);
  return 0.5 * base * (1.0 + std::cos(kPi * x));
}

// Gradient of the loss over one prepared scene, accumulated into `grads`
// with `weight`. Returns the loss, or nothing when the scene has no target
// with a valid future.
inline std::optional<LossResult> accumulate_scene(const Model& m, const PreparedSample& s,
                                                  nn::Gradients& grads, double weight) {
  nn::Binding p(m.store, true);
  MapFeatureCache cache;
  const auto r = forward(m, p, s, cache);
  auto loss = decoder_loss(r.out, s.decoder, m.config.decoder);
  if (loss.used == 0) return std::nullopt;
  if (!std::isfinite(loss.parts.total))
    throw NumericError("non-finite loss on scenario " + s.scenario_id);
  nn::backward(loss.total);
  p.accumulate_grads(grads, weight);
  return loss;
}

using EpochCallback = std::function<void(const EpochStats&)>;

inline TrainReport train_model(Model& m, const std::vector<PreparedSample>& data,
                               const EpochCallback& on_epoch = {}) {
  const auto& tc = m.config.training;
  TrainReport rep;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch = static_cast<std::size_t>(tc.batch);
  const std::size_t per_epoch = (data.size() + batch - 1) / batch;
  const std::size_t total = per_epoch * static_cast<std::size_t>(tc.epochs);
  nn::AdamW opt({tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay});
  Rng rng(tc.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i - 1)))]);
    EpochStats es;
    es.epoch = epoch;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      auto grads = nn::zero_gradients(m.store);
      std::size_t used = 0;
      for (std::size_t i = b; i < end; ++i) {
        auto loss = accumulate_scene(m, data[order[i]], grads, 1.0 / static_cast<double>(end - b));
        if (!loss) {
          ++rep.skipped;
          continue;
        }
        ++used;
        es.mean.propose += loss->parts.propose;
        es.mean.refine += loss->parts.refine;
        es.mean.cls += loss->parts.cls;
        es.mean.total += loss->parts.total;
      }
      counted += used;
      opt.config().lr = cosine_lr(tc.lr, rep.steps, total);
      es.lr = opt.config().lr;
      if (used) opt.step(m.store, grads);
      ++rep.steps;
    }
    if (counted) {
      const double inv = 1.0 / static_cast<double>(counted);
      es.mean.propose *= inv;
      es.mean.refine *= inv;
      es.mean.cls *= inv;
      es.mean.total *= inv;
    }
    es.mean.lambda = m.config.decoder.lambda;
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.epochs.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// Truth of a prediction taken from the ego track with the same id.
inline std::optional<PredictionCase> case_by_id(const TargetPrediction& p, const Scene& truth) {
  auto it = truth.ego_tracks.find(p.track_id);
  if (it == truth.ego_tracks.end()) return std::nullopt;
  PredictionCase c;
  c.scenario_id = p.scenario_id;
  c.track_id = p.track_id;
  c.modes = p.modes;
  c.agent_count = truth.agent_count();
  const std::size_t horizon = p.modes.empty() ? 0 : p.modes[0].size();
  bool any = false;
  for (std::size_t k = 0; k < horizon; ++k) {
    const AgentState* s = it->second.at(p.first_future_frame + static_cast<int>(k));
    c.truth.push_back(s ? s->position : Vec2{});
    c.valid.push_back(s != nullptr);
    any = any || s;
  }
  if (!any) return std::nullopt;
  return c;
}

// Truth from the ego track whose state at the reference frame lies closest
// to the prediction's reference position. Used when identities of the
// evaluated scene differ from the truth scene.
inline std::optional<PredictionCase> case_by_position(const TargetPrediction& p,
                                                      const Scene& truth, double max_distance) {
  const Track* best = nullptr;
  double best_d = max_distance;
  for (const auto& [id, t] : truth.ego_tracks) {
    const AgentState* s = t.at(p.reference_frame);
    if (!s) continue;
    const double d = (s->position - p.reference_position).norm();
    if (d <= best_d) {
      best_d = d;
      best = &t;
    }
  }
  if (!best) return std::nullopt;
  TargetPrediction q = p;
  q.track_id = best->id;
  return case_by_id(q, truth);
}

}  // namespace cotraj
