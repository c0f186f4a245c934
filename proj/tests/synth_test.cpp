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

#include "cotraj/scenario_io.hpp"
#include "cotraj/synth.hpp"
#include "test_util.hpp"

namespace cotraj {
namespace {

TEST(Generator, TwoAgentsBothViewsShareGeometry) {
  GeneratorConfig g;
  g.agents = 2;
  const auto gen = generate_synthetic(g, 3);
  ASSERT_EQ(gen.truth.size(), 2u);
  EXPECT_TRUE(validate_scene(gen.scene).empty());
  for (const auto& [e, o] : gen.truth) {
    const Track& te = gen.scene.ego_tracks.at(e);
    const Track& to = gen.scene.other_tracks.at(o);
    ASSERT_EQ(te.states.size(), to.states.size());
    for (const auto& [f, s] : te.states) {
      EXPECT_EQ(s.position, to.states.at(f).position);
      EXPECT_EQ(s.yaw, to.states.at(f).yaw);
    }
  }
}

TEST(Generator, Deterministic) {
  GeneratorConfig g;
  g.layout = "tee";
  EXPECT_EQ(write_scenario(generate_synthetic(g, 42).scene), write_scenario(generate_synthetic(g, 42).scene));
  EXPECT_NE(write_scenario(generate_synthetic(g, 42).scene), write_scenario(generate_synthetic(g, 43).scene));
}

TEST(Generator, ProfilesSetFrameCounts) {
  GeneratorConfig g;
  g.profile = "v2x-seq-like";
  const Scene s = generate_synthetic(g, 1).scene;
  EXPECT_EQ(s.history_frames, 50);
  EXPECT_EQ(s.future_frames, 50);
}

TEST(Generator, InfeasibleConfigRejected) {
  GeneratorConfig g;
  g.agents = 100000;
  EXPECT_THROW(generate_synthetic(g, 1), ConfigError);
  g = {};
  g.layout = "roundabout";
  EXPECT_THROW(generate_synthetic(g, 1), ConfigError);
}

TEST(Generator, SignalsConsistentWithMap) {
  const Scene s = generate_synthetic(GeneratorConfig{}, 9).scene;
  ASSERT_FALSE(s.signals.empty());
  for (const auto& sg : s.signals) {
    EXPECT_EQ(sg.records.size(), static_cast<std::size_t>(s.total_frames()));
    for (const auto& lane : sg.lane_ids) {
      bool found = false;
      for (const auto& p : s.map) found = found || (p.id == lane && p.controlling_signal == sg.id);
      EXPECT_TRUE(found) << lane;
    }
  }
}

TEST(Perturb, ZeroSpecIsIdentity) {
  const Scene s = testing::synthetic(10, 2);
  const auto r = apply_perturbations(s, PerturbationSpec{});
  EXPECT_EQ(r.scene, s);
  EXPECT_TRUE(r.log.empty());
}

TEST(Perturb, SplitRateOneOnSingleTrack) {
  Scene s;
  s.scenario_id = "one";
  s.history_frames = 50;
  s.future_frames = 50;
  s.ego_tracks["a"] = testing::straight_track("a", View::ego, {0, 0}, {8, 0}, 0, 100);
  PerturbationSpec ps;
  ps.id_split_rate = 1.0;
  ps.seed = 4;
  const auto r = apply_perturbations(s, ps);
  ASSERT_EQ(r.log.splits.size(), 1u);
  const auto& e = r.log.splits[0];
  EXPECT_GT(e.cut_frame, 0);
  EXPECT_LT(e.cut_frame, 50);
  EXPECT_EQ(r.scene.ego_tracks.at(e.head_id).last_frame(), e.cut_frame - 1);
  EXPECT_EQ(r.scene.ego_tracks.at("a").first_frame(), e.cut_frame);
}

TEST(Perturb, LoggedCountsMatchScene) {
  auto gen = generate_synthetic(GeneratorConfig{}, 12);
  PerturbationSpec ps;
  ps.id_split_rate = 0.3;
  ps.id_merge_rate = 0.2;
  ps.seed = 99;
  const auto r = apply_perturbations(gen.scene, ps, &gen.truth);
  EXPECT_FALSE(r.log.splits.empty());
  // Every split adds one track and every merge adds one fresh track.
  const std::size_t before = gen.scene.agent_count();
  std::size_t emptied = 0;
  for (const auto& m : r.log.merges)
    if (!r.scene.tracks(m.view).count(m.second_id)) ++emptied;
  EXPECT_EQ(r.scene.agent_count(), before + r.log.splits.size() + r.log.merges.size() - emptied);
}

TEST(Perturb, ReproducibleFromSeed) {
  const Scene s = testing::synthetic(15, 6);
  PerturbationSpec ps;
  ps.position_noise_sigma = 0.1;
  ps.id_split_rate = 0.3;
  ps.id_merge_rate = 0.2;
  ps.occlusion_rate = 0.1;
  ps.seed = 17;
  EXPECT_EQ(apply_perturbations(s, ps).scene, apply_perturbations(s, ps).scene);
}

TEST(Perturb, NoiseStandardDeviation) {
  const Scene s = testing::synthetic(80, 8);
  PerturbationSpec ps;
  ps.position_noise_sigma = 0.1;
  ps.seed = 5;
  const auto r = apply_perturbations(s, ps);
  ASSERT_GE(r.log.noise.size(), 5000u);  // two coordinates per draw
  double sx = 0, sxx = 0;
  for (const auto& n : r.log.noise) {
    sx += n.dx + n.dy;
    sxx += n.dx * n.dx + n.dy * n.dy;
  }
  const double count = 2.0 * static_cast<double>(r.log.noise.size());
  const double mean = sx / count;
  const double sd = std::sqrt(sxx / count - mean * mean);
  EXPECT_NEAR(sd, 0.1, 0.01);
  // The logged draw is exactly the applied offset.
  const auto& n = r.log.noise.front();
  const Vec2 orig = s.tracks(n.view).at(n.track_id).states.at(n.frame).position;
  const Vec2 now = r.scene.tracks(n.view).at(n.track_id).states.at(n.frame).position;
  EXPECT_EQ(now.x, orig.x + n.dx);
}

TEST(Perturb, NoiseOnlyTouchesHistory) {
  const Scene s = testing::synthetic(10, 8);
  PerturbationSpec ps;
  ps.position_noise_sigma = 0.3;
  ps.occlusion_rate = 0.2;
  ps.seed = 2;
  const auto r = apply_perturbations(s, ps);
  for (const auto& [id, t] : s.ego_tracks)
    for (const auto& [f, st] : t.states)
      if (f >= s.history_frames) {
        EXPECT_EQ(r.scene.ego_tracks.at(id).states.at(f), st);
      }
  for (const auto& o : r.log.occlusions) EXPECT_LT(o.removed.frame, s.history_frames - 1);
}

TEST(Perturb, InvertibleGivenLog) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    auto gen = generate_synthetic(GeneratorConfig{}, seed);
    PerturbationSpec ps;
    ps.id_split_rate = 0.3;
    ps.id_merge_rate = 0.3;
    ps.occlusion_rate = 0.1;
    ps.seed = seed + 100;
    const auto r = apply_perturbations(gen.scene, ps, &gen.truth);
    EXPECT_EQ(restore_identities(r.scene, r.log), gen.scene);
  }
}

TEST(Perturb, InvalidSpecRejected) {
  PerturbationSpec ps;
  ps.occlusion_rate = 1.5;
  EXPECT_THROW(apply_perturbations(testing::synthetic(2, 1), ps), ConfigError);
  ps = {};
  ps.position_noise_sigma = -1;
  EXPECT_THROW(ps.validate(), ConfigError);
}

}  // namespace
}  // namespace cotraj
