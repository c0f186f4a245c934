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
#include <complex>
#include <set>

#include "cotraj/model.hpp"
#include "test_util.hpp"

namespace cotraj {
namespace {

using testing::small_config;
using testing::straight_track;

std::vector<double> naive_dft(const std::vector<double>& x, std::size_t T, std::size_t d) {
  std::vector<double> out(T * 2 * d);
  for (std::size_t k = 0; k < T; ++k)
    for (std::size_t c = 0; c < d; ++c) {
      std::complex<double> acc = 0.0;
      for (std::size_t t = 0; t < T; ++t)
        acc += x[t * d + c] * std::polar(1.0, -2.0 * kPi * double(k) * double(t) / double(T));
      acc /= std::sqrt(double(T));
      out[k * 2 * d + c] = acc.real();
      out[k * 2 * d + d + c] = acc.imag();
    }
  return out;
}

TEST(TimeDft, MatchesNaiveReference) {
  Rng rng(1);
  std::vector<double> x(8 * 4);
  for (auto& v : x) v = rng.uniform(-1, 1);
  const nn::Tensor y = time_dft(nn::Tensor::matrix(8, 4, x));
  const auto ref = naive_dft(x, 8, 4);
  ASSERT_EQ(y.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-10);
}

TEST(TimeDft, ConstantChannelHasOnlyZeroFrequency) {
  const nn::Tensor y = time_dft(nn::Tensor::matrix(6, 1, std::vector<double>(6, 2.0)));
  EXPECT_NEAR(y.at(0, 0), 2.0 * std::sqrt(6.0), 1e-12);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_NEAR(y.at(k, 0), 0.0, 1e-12);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(y.at(k, 1), 0.0, 1e-12);
}

TEST(TimeDft, SingleSampleIsIdentity) {
  const nn::Tensor y = time_dft(nn::Tensor::matrix(1, 3, {0.5, -1, 2}));
  EXPECT_EQ(y.at(0, 0), 0.5);
  EXPECT_EQ(y.at(0, 1), -1.0);
  EXPECT_EQ(y.at(0, 2), 2.0);
  for (std::size_t c = 3; c < 6; ++c) EXPECT_EQ(y.at(0, c), 0.0);
  EXPECT_THROW(time_dft(nn::Tensor::zeros({0, 3})), std::invalid_argument);
}

TEST(TimeDft, GradientMatchesFiniteDifference) {
  Rng rng(2);
  std::vector<double> x(5 * 2), w(5 * 4);
  for (auto& v : x) v = rng.uniform(-1, 1);
  for (auto& v : w) v = rng.uniform(-1, 1);
  nn::Tensor leaf = nn::Tensor::matrix(5, 2, x, true);
  nn::backward(nn::weighted_sum(time_dft(leaf), w));
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto f = [&](double v) {
      auto y = x;
      y[i] = v;
      return nn::weighted_sum(time_dft(nn::Tensor::matrix(5, 2, y)), w).item();
    };
    EXPECT_NEAR(leaf.grad()[i], testing::central_difference(f, x[i], 1e-6), 1e-8);
  }
}

// Two agents seen by both views; the ego view loses "a" for frames 20-30.
Scene two_view_scene() {
  Scene s;
  s.scenario_id = "fuse";
  s.history_frames = 40;
  s.future_frames = 40;
  s.ego_tracks["a"] = straight_track("a", View::ego, {0, 0}, {8, 0}, 0, 80);
  s.ego_tracks["b"] = straight_track("b", View::ego, {0, 20}, {-8, 0}, 0, 80);
  s.other_tracks["x"] = straight_track("x", View::other, {0, 0}, {8, 0}, 0, 80);
  s.other_tracks["y"] = straight_track("y", View::other, {0, 20}, {-8, 0}, 0, 80);
  for (int f = 20; f <= 30; ++f) s.ego_tracks["a"].states.erase(f);
  s.target_ids = {"a", "b"};
  return s;
}

IdentityMap map_of(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  IdentityMap m;
  for (auto [e, o] : pairs) {
    m.ego_to_other[e] = o;
    m.other_to_ego[o] = e;
  }
  return m;
}

TEST(Fusion, OcclusionIsFilledFromTheOtherView) {
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, EncoderConfig{}, true);
  const auto f = prepare_fusion(s, enc, map_of({{"a", "x"}, {"b", "y"}}), FusionConfig{}, true, 50);
  std::set<int> frames;
  for (auto r : f.track_rows.at("a")) {
    frames.insert(f.rows[r].frame);
    EXPECT_EQ(f.rows[r].tag, Provenance::fused);
    EXPECT_EQ(f.rows[r].fill_in, f.rows[r].frame >= 20 && f.rows[r].frame <= 30);
  }
  EXPECT_EQ(frames.size(), 40u);
  EXPECT_EQ(f.coverage.fill_ins, 11u);
  EXPECT_EQ(f.coverage.ego_slots, 69u);
  EXPECT_EQ(f.coverage.fused_slots, 80u);
  // Rows of one track are in frame order.
  int prev = -1;
  for (auto r : f.track_rows.at("a")) {
    EXPECT_GT(f.rows[r].frame, prev);
    prev = f.rows[r].frame;
  }
}

TEST(Fusion, CrossEdgesStayInsideTheWindowAndPair) {
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, EncoderConfig{}, true);
  FusionConfig cfg;
  cfg.window = 2;
  const auto f = prepare_fusion(s, enc, map_of({{"a", "x"}, {"b", "y"}}), cfg, true, 50);
  for (std::size_t e = 0; e < f.cross.size(); ++e) {
    const auto& src = enc.slots[f.cross.src[e]];
    const auto& dst = f.rows[f.cross.dst[e]];
    EXPECT_EQ(src.view, View::other);
    EXPECT_EQ(src.track == "x" ? "a" : "b", dst.track);
    EXPECT_LE(std::abs(src.frame - dst.frame), 2);
    EXPECT_FALSE(dst.fill_in);
  }
}

TEST(Fusion, EmptyIdentityMapPassesEgoThrough) {
  const Model m(small_config());
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, m.config.encoder, true);
  const auto f = prepare_fusion(s, enc, IdentityMap{}, m.config.fusion, true, 50);
  for (const auto& r : f.rows) EXPECT_EQ(r.tag, Provenance::ego_only);
  nn::NoGradGuard g;
  nn::Binding p(m.store, false);
  MapFeatureCache cache;
  const nn::Tensor tokens = encode_agents(p, m.encoder, enc, cache, m.config.ablation);
  const nn::Tensor fused = fuse(p, m.fusion, tokens, f);
  ASSERT_EQ(fused.rows(), f.ego_src.size());
  for (std::size_t r = 0; r < fused.rows(); ++r)
    for (std::size_t c = 0; c < fused.cols(); ++c) EXPECT_EQ(fused.at(r, c), tokens.at(f.ego_src[r], c));
}

TEST(Fusion, NoCrossTalkBetweenPairs) {
  const Model m(small_config());
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, m.config.encoder, true);
  const auto f = prepare_fusion(s, enc, map_of({{"a", "x"}, {"b", "y"}}), m.config.fusion, true, 50);
  nn::NoGradGuard g;
  nn::Binding p(m.store, false);
  MapFeatureCache cache;
  const nn::Tensor tokens = encode_agents(p, m.encoder, enc, cache, m.config.ablation);
  const nn::Tensor base = fuse(p, m.fusion, tokens, f);
  // Scramble the tokens of the other-view partner of "a".
  std::vector<double> v(tokens.values().begin(), tokens.values().end());
  for (auto r : enc.track_rows.at({View::other, "x"}))
    for (std::size_t c = 0; c < tokens.cols(); ++c) v[r * tokens.cols() + c] += 0.5 + 0.1 * double(c);
  const nn::Tensor changed = fuse(p, m.fusion, nn::Tensor::matrix(tokens.rows(), tokens.cols(), v), f);
  bool a_changed = false;
  for (std::size_t r = 0; r < f.rows.size(); ++r)
    for (std::size_t c = 0; c < base.cols(); ++c) {
      if (f.rows[r].track == "b") EXPECT_EQ(base.at(r, c), changed.at(r, c));
      else a_changed = a_changed || base.at(r, c) != changed.at(r, c);
    }
  EXPECT_TRUE(a_changed);
}

TEST(Fusion, IdenticalViewsFuseToFiniteTokens) {
  const Model m(small_config());
  Scene s = two_view_scene();
  s.ego_tracks["a"] = straight_track("a", View::ego, {0, 0}, {8, 0}, 0, 80);
  const auto enc = prepare_encoder(s, m.config.encoder, true);
  const auto f = prepare_fusion(s, enc, map_of({{"a", "x"}}), m.config.fusion, true, 50);
  nn::NoGradGuard g;
  nn::Binding p(m.store, false);
  MapFeatureCache cache;
  const nn::Tensor fused = fuse(p, m.fusion, encode_agents(p, m.encoder, enc, cache, m.config.ablation), f);
  for (double v : fused.values()) EXPECT_TRUE(std::isfinite(v));
  for (auto r : f.track_rows.at("a")) EXPECT_EQ(f.rows[r].tag, Provenance::fused);
  for (auto r : f.track_rows.at("b")) EXPECT_EQ(f.rows[r].tag, Provenance::ego_only);
}

TEST(Fusion, InconsistentMapRejected) {
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, EncoderConfig{}, true);
  EXPECT_THROW(prepare_fusion(s, enc, map_of({{"a", "nope"}}), FusionConfig{}, true, 50), InconsistentMap);
  EXPECT_THROW(prepare_fusion(s, enc, map_of({{"nope", "x"}}), FusionConfig{}, true, 50), InconsistentMap);
  IdentityMap broken = map_of({{"a", "x"}});
  broken.other_to_ego["x"] = "b";
  EXPECT_THROW(prepare_fusion(s, enc, broken, FusionConfig{}, true, 50), InconsistentMap);
  broken = map_of({{"a", "x"}});
  broken.other_to_ego["y"] = "b";
  EXPECT_THROW(prepare_fusion(s, enc, broken, FusionConfig{}, true, 50), InconsistentMap);
}

TEST(Fusion, WithoutIdentitiesUsesSameFrameRadius) {
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, EncoderConfig{}, true);
  const auto f = prepare_fusion(s, enc, map_of({{"nope", "x"}}), FusionConfig{}, false, 5.0);
  EXPECT_EQ(f.coverage.fill_ins, 0u);
  EXPECT_TRUE(f.spectral_groups.empty());
  EXPECT_TRUE(f.pairs.empty());
  for (std::size_t e = 0; e < f.cross.size(); ++e) {
    const auto& src = enc.slots[f.cross.src[e]];
    const auto& dst = f.rows[f.cross.dst[e]];
    EXPECT_EQ(src.frame, dst.frame);
    EXPECT_LE((src.state.position - dst.state.position).norm(), 5.0);
  }
  EXPECT_GT(f.cross.size(), 0u);
}

TEST(Fusion, FillInAndSpectralFlags) {
  const Scene s = two_view_scene();
  const auto enc = prepare_encoder(s, EncoderConfig{}, true);
  FusionConfig cfg;
  cfg.fill_in = false;
  cfg.spectral = false;
  const auto f = prepare_fusion(s, enc, map_of({{"a", "x"}}), cfg, true, 50);
  EXPECT_EQ(f.coverage.fill_ins, 0u);
  EXPECT_TRUE(f.spectral_groups.empty());
  EXPECT_EQ(f.pairs.size(), 1u);
  EXPECT_EQ(f.pairs[0].co_present.size(), 29u);
}

// Coverage after fusion equals ego presence united with mapped other presence.
TEST(Fusion, CoverageEqualsUnionUnderOcclusion) {
  const auto cfg = small_config();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GeneratorConfig g;
    g.agents = 12;
    auto gen = generate_synthetic(g, seed);
    PerturbationSpec ps;
    ps.occlusion_rate = 0.2;
    ps.perturb_other = false;
    ps.seed = seed;
    const Scene raw = apply_perturbations(gen.scene, ps).scene;
    const auto sample = prepare_sample(raw, cfg);
    const int lo = sample.encoder.first_frame, hi = sample.scene.history_frames;
    std::set<std::pair<std::string, int>> expect, got;
    for (const auto& [id, t] : sample.scene.ego_tracks)
      for (const auto& [f, st] : t.states)
        if (f >= lo && f < hi) expect.insert({id, f});
    for (const auto& [e, o] : sample.identities.ego_to_other)
      for (const auto& [f, st] : sample.scene.other_tracks.at(o).states)
        if (f >= lo && f < hi) expect.insert({e, f});
    for (const auto& r : sample.fusion.rows) EXPECT_TRUE(got.insert({r.track, r.frame}).second);
    EXPECT_EQ(got, expect) << "seed " << seed;
    EXPECT_GT(sample.fusion.coverage.fill_ins, 0u);
  }
}

}  // namespace
}  // namespace cotraj
