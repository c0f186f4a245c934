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

// Cross-view fusion. Other-view tracks are aligned to ego tracks through the
// identity map; each aligned pair gets a spectral enrichment along time, ego
// tokens attend a window of the partner's tokens, and frames seen only by the
// other view become fill-in rows seeded from the partner.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cotraj/assoc.hpp"
#include "cotraj/encoder.hpp"

namespace cotraj {

class InconsistentMap : public DataError {
 public:
  using DataError::DataError;
};

enum class Provenance { ego_only = 0, fused = 1 };

inline const char* to_string(Provenance p) {
  return p == Provenance::ego_only ? "ego_only" : "fused";
}

// DFT along rows (time) of x [T x d], orthonormal scaling, returned as
// [T x 2d] = [Re | Im].
inline nn::Tensor time_dft(const nn::Tensor& x) {
  const std::size_t T = x.rows();
  if (T == 0) throw std::invalid_argument("time_dft: empty sequence");
  std::vector<double> c(T * T), s(T * T);
  const double norm = 1.0 / std::sqrt(static_cast<double>(T));
  for (std::size_t k = 0; k < T; ++k)
    for (std::size_t t = 0; t < T; ++t) {
      const double a = 2.0 * kPi * static_cast<double>((k * t) % T) / static_cast<double>(T);
      c[k * T + t] = std::cos(a) * norm;
      s[k * T + t] = -std::sin(a) * norm;
    }
  return nn::concat_cols({nn::matmul(nn::Tensor::matrix(T, T, std::move(c)), x),
                          nn::matmul(nn::Tensor::matrix(T, T, std::move(s)), x)});
}

struct FusedSlot {
  std::string track;  // ego track id
  int frame = 0;
  AgentState state;   // ego state, or the partner's state for a fill-in
  Provenance tag = Provenance::ego_only;
  bool fill_in = false;
  std::size_t source_row = 0;  // encoder token row
};

struct AlignedPair {
  std::string ego_id;
  std::string other_id;
  std::vector<int> co_present;  // frames where both views observe the agent
};

struct CoverageStats {
  std::size_t ego_slots = 0;
  std::size_t fill_ins = 0;
  std::size_t fused_slots = 0;
  std::size_t pairs = 0;
  std::size_t cross_edges = 0;
};

struct FusionInputs {
  std::vector<FusedSlot> rows;        // ego slots in encoder order, then fill-ins
  std::vector<std::size_t> ego_src;   // encoder rows of the ego slots
  std::vector<std::size_t> fill_src;  // encoder rows seeding the fill-ins
  std::vector<std::vector<std::size_t>> spectral_groups;  // encoder rows per aligned track
  EdgeList cross;                     // encoder row (other view) -> fused row
  std::map<std::string, std::vector<std::size_t>> track_rows;  // frame order
  std::vector<AlignedPair> pairs;
  CoverageStats coverage;
};

inline void check_identity_map(const Scene& scene, const IdentityMap& map) {
  for (const auto& [e, o] : map.ego_to_other) {
    if (!scene.ego_tracks.count(e))
      throw InconsistentMap("identity map references missing ego track " + e);
    if (!scene.other_tracks.count(o))
      throw InconsistentMap("identity map references missing other track " + o);
    auto it = map.other_to_ego.find(o);
    if (it == map.other_to_ego.end() || it->second != e)
      throw InconsistentMap("identity map is not bijective at " + e + " -> " + o);
  }
  if (map.other_to_ego.size() != map.ego_to_other.size())
    throw InconsistentMap("identity map directions disagree");
}

// With `use_fam` off no identities are used: each ego token attends the
// other-view tokens of the same frame within `r_social`, and there is no
// spectral path and no fill-in.
inline FusionInputs prepare_fusion(const Scene& scene, const EncoderInputs& enc,
                                   const IdentityMap& map, const FusionConfig& cfg,
                                   bool use_fam, double r_social) {
  if (use_fam) check_identity_map(scene, map);
  FusionInputs f;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const auto& s = enc.slots[i];
    if (s.view != View::ego) continue;
    f.track_rows[s.track].push_back(f.rows.size());
    f.ego_src.push_back(i);
    f.rows.push_back({s.track, s.frame, s.state, Provenance::ego_only, false, i});
  }
  f.coverage.ego_slots = f.rows.size();

  if (!use_fam) {
    std::map<int, std::vector<std::size_t>> other_at;
    for (std::size_t i = 0; i < enc.size(); ++i)
      if (enc.slots[i].view == View::other) other_at[enc.slots[i].frame].push_back(i);
    for (std::size_t r = 0; r < f.rows.size(); ++r) {
      auto& row = f.rows[r];
      auto it = other_at.find(row.frame);
      if (it == other_at.end()) continue;
      for (auto j : it->second) {
        const auto& o = enc.slots[j].state;
        if ((o.position - row.state.position).norm() > r_social) continue;
        f.cross.add(j, r, rel_descriptor(pose_of(row.state), pose_of(o)));
        row.tag = Provenance::fused;
      }
    }
  } else {
    for (const auto& [ego_id, other_id] : map.ego_to_other) {
      auto ie = enc.track_rows.find({View::ego, ego_id});
      auto io = enc.track_rows.find({View::other, other_id});
      if (ie == enc.track_rows.end() || io == enc.track_rows.end()) continue;
      AlignedPair pair{ego_id, other_id, {}};
      std::map<int, std::size_t> other_rows;
      for (auto j : io->second) other_rows[enc.slots[j].frame] = j;
      std::set<int> ego_frames;
      for (auto i : ie->second) ego_frames.insert(enc.slots[i].frame);
      if (cfg.spectral) {
        f.spectral_groups.push_back(ie->second);
        f.spectral_groups.push_back(io->second);
      }
      auto& rows = f.track_rows[ego_id];
      for (auto r : rows) {
        auto& row = f.rows[r];
        if (!other_rows.count(row.frame)) continue;
        pair.co_present.push_back(row.frame);
        for (auto it = other_rows.lower_bound(row.frame - cfg.window);
             it != other_rows.end() && it->first <= row.frame + cfg.window; ++it)
          f.cross.add(it->second, r,
                      rel_descriptor(pose_of(row.state), pose_of(enc.slots[it->second].state)));
        row.tag = Provenance::fused;
      }
      if (cfg.fill_in) {
        for (const auto& [frame, j] : other_rows) {
          if (ego_frames.count(frame)) continue;
          rows.push_back(f.rows.size());
          f.fill_src.push_back(j);
          f.rows.push_back({ego_id, frame, enc.slots[j].state, Provenance::fused, true, j});
        }
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
          return f.rows[a].frame < f.rows[b].frame;
        });
      }
      f.pairs.push_back(std::move(pair));
    }
  }
  f.coverage.fill_ins = f.fill_src.size();
  f.coverage.pairs = f.pairs.size();
  f.coverage.cross_edges = f.cross.size();
  for (const auto& r : f.rows) f.coverage.fused_slots += r.tag == Provenance::fused;
  return f;
}

struct FusionWeights {
  nn::Linear spectral;  // [Re | Im] (2d) -> d
  nn::FourierEmbed rel;
  nn::RelAttentionBlock cross;

  static FusionWeights make(nn::ParameterStore& s, const EncoderConfig& c, Rng& rng) {
    const auto d = static_cast<std::size_t>(c.d_model);
    FusionWeights w;
    w.spectral = nn::Linear::make(s, "fus.spectral", 2 * d, d, rng, 0.5);
    w.rel = nn::FourierEmbed::make(s, "fus.rel", kRelFeatureDim,
                                   static_cast<std::size_t>(c.n_freq), d, rng);
    w.cross = nn::RelAttentionBlock::make(s, "fus.cross", d, static_cast<std::size_t>(c.heads),
                                          static_cast<std::size_t>(c.hidden), rng);
    return w;
  }
};

// Fused grid [f.rows x d] from encoder tokens [slots x d].
inline nn::Tensor fuse(nn::Binding& p, const FusionWeights& w, const nn::Tensor& tokens,
                       const FusionInputs& f) {
  nn::Tensor base = tokens;
  if (!f.spectral_groups.empty()) {
    const std::size_t n = tokens.rows(), d = tokens.cols();
    std::vector<nn::Tensor> parts;
    std::vector<std::size_t> index(n, 0);
    std::size_t next = 0;
    for (const auto& g : f.spectral_groups) {
      parts.push_back(time_dft(nn::gather_rows(tokens, g)));
      for (auto r : g) index[r] = next++;
    }
    std::vector<bool> touched(n, false);
    for (const auto& g : f.spectral_groups)
      for (auto r : g) touched[r] = true;
    for (std::size_t r = 0; r < n; ++r)
      if (!touched[r]) index[r] = next;
    const nn::Tensor proj = w.spectral(p, nn::concat_rows(parts));
    const nn::Tensor delta =
        nn::gather_rows(nn::concat_rows({proj, nn::Tensor::zeros({1, d})}), index);
    base = nn::select_rows(touched, nn::add(tokens, delta), tokens);
  }
  nn::Tensor grid = nn::gather_rows(base, f.ego_src);
  if (!f.fill_src.empty()) grid = nn::concat_rows({grid, nn::gather_rows(base, f.fill_src)});
  if (f.cross.empty()) return grid;
  const nn::Tensor rel = w.rel(p, f.cross.rel_tensor());
  return w.cross(p, grid, base, f.cross.src, f.cross.dst, &rel);
}

inline nlohmann::ordered_json coverage_to_json(const FusionInputs& f) {
  nlohmann::ordered_json j;
  j["ego_slots"] = f.coverage.ego_slots;
  j["fill_ins"] = f.coverage.fill_ins;
  j["fused_slots"] = f.coverage.fused_slots;
  j["total_slots"] = f.rows.size();
  j["aligned_pairs"] = f.coverage.pairs;
  j["cross_edges"] = f.coverage.cross_edges;
  return j;
}

}  // namespace cotraj
