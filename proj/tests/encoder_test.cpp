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

#include "cotraj/model.hpp"
#include "test_util.hpp"

namespace cotraj {
namespace {

using testing::small_config;
using testing::straight_track;

std::vector<double> encode(const Model& m, const EncoderInputs& in, MapFeatureCache& cache,
                           const AblationConfig& ab) {
  nn::NoGradGuard g;
  nn::Binding p(m.store, false);
  const nn::Tensor t = encode_agents(p, m.encoder, in, cache, ab);
  return {t.values().begin(), t.values().end()};
}

std::vector<double> encode(const Model& m, const Scene& s) {
  MapFeatureCache cache;
  return encode(m, prepare_encoder(s, m.config.encoder, true), cache, m.config.ablation);
}

// Per-row relative error of two token grids.
double max_row_relative_error(const std::vector<double>& a, const std::vector<double>& b, std::size_t d) {
  double worst = 0.0;
  for (std::size_t r = 0; r * d < a.size(); ++r) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      diff += std::pow(a[r * d + c] - b[r * d + c], 2);
      norm += std::pow(a[r * d + c], 2);
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  return worst;
}

Scene open_road() {
  Scene s;
  s.scenario_id = "road";
  s.history_frames = 10;
  s.future_frames = 40;
  for (auto [id, y] : {std::pair{"a", 0.0}, {"b", 4.0}, {"c", 400.0}}) {
    s.ego_tracks[id] = straight_track(id, View::ego, {0, y}, {10, 0}, 0, 50);
  }
  s.target_ids = {"a"};
  return s;
}

TEST(Encoder, InvariantToRigidMotion) {
  const Model m(small_config());
  const Scene s = testing::synthetic(8, 3);
  const auto base = encode(m, s);
  ASSERT_FALSE(base.empty());
  Rng rng(4);
  for (int i = 0; i < 4; ++i) {
    const RigidMotion mo{rng.uniform(-kPi, kPi), {rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)}};
    const auto moved = encode(m, transform_scene(s, mo));
    ASSERT_EQ(moved.size(), base.size());
    EXPECT_LT(max_row_relative_error(base, moved, 16), 1e-6);
  }
}

TEST(Encoder, MapCacheBuildsOnceAndCountsReads) {
  const Model m(small_config());
  const Scene s = testing::synthetic(10, 5);
  const auto in = prepare_encoder(s, m.config.encoder, true);
  ASSERT_FALSE(in.ma.empty());
  MapFeatureCache cache;
  encode(m, in, cache, m.config.ablation);
  EXPECT_EQ(cache.stats().recomputes, 1u);
  EXPECT_EQ(cache.stats().hits, in.ma.size() * static_cast<std::size_t>(m.config.encoder.rounds));
  EXPECT_EQ(cache.stats().polygon_encodings, in.map.size());
  encode(m, in, cache, m.config.ablation);
  EXPECT_EQ(cache.stats().recomputes, 1u);
}

TEST(Encoder, CacheRebuildsAfterWeightUpdate) {
  Model m(small_config());
  const Scene s = testing::synthetic(6, 5);
  const auto in = prepare_encoder(s, m.config.encoder, true);
  MapFeatureCache cache;
  encode(m, in, cache, m.config.ablation);
  m.store.bump_version();
  encode(m, in, cache, m.config.ablation);
  EXPECT_EQ(cache.stats().recomputes, 2u);
}

TEST(Encoder, DisabledCacheGivesSameTokens) {
  PipelineConfig cfg = small_config();
  cfg.encoder.rounds = 2;
  const Model m(cfg);
  const Scene s = testing::synthetic(6, 7);
  const auto in = prepare_encoder(s, cfg.encoder, true);
  MapFeatureCache on(true), off(false);
  const auto a = encode(m, in, on, cfg.ablation);
  const auto b = encode(m, in, off, cfg.ablation);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_GT(off.stats().recomputes, 1u);
  EXPECT_EQ(off.stats().hits, 0u);
}

TEST(Encoder, AbsentFramesHaveNoSlot) {
  Scene s = open_road();
  s.ego_tracks["a"].states.erase(4);
  const auto in = prepare_encoder(s, EncoderConfig{}, true);
  for (const auto& slot : in.slots) EXPECT_FALSE(slot.track == "a" && slot.frame == 4);
  EXPECT_EQ(in.track_rows.at({View::ego, "a"}).size(), 9u);
}

TEST(Encoder, IdenticalLocalStatesEmbedIdentically) {
  const Scene s = open_road();
  const auto in = prepare_encoder(s, EncoderConfig{}, true);
  const auto& ra = in.track_rows.at({View::ego, "a"});
  const auto& rc = in.track_rows.at({View::ego, "c"});
  for (std::size_t k = 0; k < ra.size(); ++k)
    for (std::size_t c = 0; c < kAgentFeatureDim; ++c)
      EXPECT_EQ(in.agent_x[ra[k] * kAgentFeatureDim + c], in.agent_x[rc[k] * kAgentFeatureDim + c]);
}

TEST(InteractionGraph, RadiusGating) {
  Scene s = open_road();
  EncoderConfig cfg;
  cfg.r_social = 50;
  const auto in = prepare_encoder(s, cfg, true);
  // a <-> b at every history frame, c is isolated.
  EXPECT_EQ(in.graph.radius, 2u * 10);
  EXPECT_EQ(in.graph.same_signal, 0u);
  EXPECT_EQ(in.graph.full, 6u * 10);
  EXPECT_NEAR(in.graph.saved_fraction(), 1.0 - 20.0 / 60.0, 1e-15);
  cfg.r_social = 1.0;
  EXPECT_TRUE(prepare_encoder(s, cfg, true).ss.empty());
}

TEST(InteractionGraph, DenseSceneEdgeReduction) {
  const Scene s = testing::synthetic(40, 9);
  EncoderConfig gated, full;
  full.r_social = 1e9;
  const auto a = prepare_encoder(s, gated, true).graph;
  const auto b = prepare_encoder(s, full, true).graph;
  EXPECT_LT(a.gated(), b.gated());
  EXPECT_EQ(b.gated(), b.full);
  EXPECT_EQ(a.full, b.full);
}

// Three agents standing on one controlled lane, far apart.
Scene signal_scene() {
  Scene s;
  s.scenario_id = "sig";
  s.history_frames = 2;
  s.future_frames = 40;
  MapPolygon lane;
  lane.id = "L";
  lane.points = {{0, 0}, {40, 0}};
  lane.entry = {{0, 0}, 0.0};
  lane.controlling_signal = "S";
  s.map.push_back(lane);
  SignalSchedule sig;
  sig.id = "S";
  sig.lane_ids = {"L"};
  sig.cycle_seconds = 30;
  sig.records[0] = {SignalColor::red, 10};
  sig.records[1] = {SignalColor::red, 9.9};
  s.signals.push_back(sig);
  for (auto [id, x] : {std::pair{"a", 2.0}, {"b", 20.0}, {"c", 38.0}})
    s.ego_tracks[id] = straight_track(id, View::ego, {x, 0}, {0.001, 0}, 0, 42);
  return s;
}

TEST(InteractionGraph, SameSignalEdgesIgnoreRadius) {
  const Scene s = signal_scene();
  EncoderConfig cfg;
  cfg.r_social = 1.0;
  const auto in = prepare_encoder(s, cfg, true);
  EXPECT_EQ(in.graph.same_signal, 6u * 2);
  EXPECT_EQ(in.graph.radius, 0u);
  const auto off = prepare_encoder(s, cfg, false);
  EXPECT_EQ(off.graph.same_signal, 0u);
  for (double v : off.signal_x) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, SignalColorFlagOnlyClearsColourCode) {
  const Scene s = signal_scene();
  EncoderConfig with, without;
  without.signal_color = false;
  const auto a = prepare_encoder(s, with, true);
  const auto b = prepare_encoder(s, without, true);
  for (std::size_t r = 0; r < a.size(); ++r) {
    EXPECT_EQ(a.signal_x[r * kSignalFeatureDim + 2], 1.0);  // red
    for (std::size_t c = 2; c < kSignalFeatureDim; ++c) EXPECT_EQ(b.signal_x[r * kSignalFeatureDim + c], 0.0);
    for (std::size_t c = 0; c < 2; ++c)
      EXPECT_EQ(a.signal_x[r * kSignalFeatureDim + c], b.signal_x[r * kSignalFeatureDim + c]);
  }
  EXPECT_EQ(a.graph.same_signal, b.graph.same_signal);
}

TEST(Encoder, IsolatedAgentIgnoresFarAgents) {
  PipelineConfig cfg = small_config();
  cfg.encoder.encode_frames = 0;
  cfg.encoder.rounds = 2;
  const Model m(cfg);
  Scene s = open_road();
  const auto base = encode(m, s);
  s.ego_tracks["c"] = straight_track("c", View::ego, {50, 300}, {-3, 2}, 0, 50);
  const auto moved = encode(m, s);
  const auto in = prepare_encoder(s, cfg.encoder, true);
  for (const auto& key : {TrackKey{View::ego, "a"}, TrackKey{View::ego, "b"}})
    for (auto r : in.track_rows.at(key))
      for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(base[r * 16 + c], moved[r * 16 + c]);
}

TEST(Encoder, TokensDependOnlyOnThePast) {
  PipelineConfig cfg = small_config();
  cfg.encoder.rounds = 2;
  const Model m(cfg);
  Scene s = testing::synthetic(8, 11);
  const auto base = encode(m, s);
  const int last = s.history_frames - 1;
  for (auto& [id, t] : s.ego_tracks)
    if (auto it = t.states.find(last); it != t.states.end()) it->second.position.x += 3.0;
  const auto changed = encode(m, s);
  const auto in = prepare_encoder(s, cfg.encoder, true);
  bool any_diff = false;
  for (std::size_t r = 0; r < in.size(); ++r)
    for (std::size_t c = 0; c < 16; ++c) {
      if (in.slots[r].frame < last) EXPECT_EQ(base[r * 16 + c], changed[r * 16 + c]);
      else any_diff = any_diff || base[r * 16 + c] != changed[r * 16 + c];
    }
  EXPECT_TRUE(any_diff);
}

TEST(Encoder, TemporalWindowAndEncodedFrames) {
  const Scene s = open_road();
  EncoderConfig cfg;
  cfg.tau_history = 3;
  cfg.encode_frames = 6;
  const auto in = prepare_encoder(s, cfg, true);
  EXPECT_EQ(in.first_frame, 4);
  EXPECT_EQ(in.track_rows.at({View::ego, "a"}).size(), 6u);
  for (std::size_t e = 0; e < in.st.size(); ++e) {
    const int gap = in.slots[in.st.dst[e]].frame - in.slots[in.st.src[e]].frame;
    EXPECT_GE(gap, 1);
    EXPECT_LE(gap, 3);
  }
  // Per track: 6 tokens, each with min(k, 3) predecessors.
  EXPECT_EQ(in.st.size(), 3u * (0 + 1 + 2 + 3 + 3 + 3));
}

TEST(Encoder, AblationsChangeTheirPath) {
  const Model m(small_config());
  const Scene s = testing::synthetic(8, 13);
  const auto in = prepare_encoder(s, m.config.encoder, true);
  MapFeatureCache cache;
  const auto full = encode(m, in, cache, {});
  for (int which = 0; which < 3; ++which) {
    AblationConfig ab;
    (which == 0 ? ab.use_st_a : which == 1 ? ab.use_m_a : ab.use_ss_a) = false;
    EXPECT_NE(encode(m, in, cache, ab), full) << which;
  }
  AblationConfig no_map;
  no_map.use_m_a = false;
  MapFeatureCache fresh;
  encode(m, in, fresh, no_map);
  EXPECT_EQ(fresh.stats().recomputes, 0u);
}

TEST(Encoder, SinglePolygonMapIsFinite) {
  const Model m(small_config());
  Scene s = signal_scene();
  s.signals.clear();
  s.map[0].controlling_signal.reset();
  for (double v : encode(m, s)) EXPECT_TRUE(std::isfinite(v));
}

}  // namespace
}  // namespace cotraj
