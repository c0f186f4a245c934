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

// Scene encoder. Inputs are precomputed once per scene as local features and
// edge lists (EncoderInputs); the forward pass only runs tensor ops.
//
// Token rows are agent-frame slots, ego view first, each track in frame
// order. Map polygons are encoded once per (map, weights) into a
// MapFeatureCache that every agent, frame and view reads.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cotraj/config.hpp"
#include "cotraj/geometry.hpp"
#include "cotraj/nn/layers.hpp"
#include "cotraj/polygon.hpp"
#include "cotraj/scene.hpp"
#include "cotraj/signal.hpp"

namespace cotraj {

inline constexpr std::size_t kAgentFeatureDim = 16;
inline constexpr std::size_t kSignalFeatureDim = 5;
inline constexpr std::size_t kRelFeatureDim = 6;
inline constexpr std::size_t kPointFeatureDim = 7;
inline constexpr std::size_t kPolygonFeatureDim = 4;

// [distance/10, sin/cos bearing, sin/cos relative heading, dt/10]
inline std::array<double, kRelFeatureDim> rel_features(const RelDescriptor& r) {
  return {r.distance / 10.0,         std::sin(r.bearing),
          std::cos(r.bearing),       std::sin(r.rel_heading),
          std::cos(r.rel_heading),   r.dt / 10.0};
}

struct EdgeList {
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<double> rel;  // row-major [size x kRelFeatureDim]

  std::size_t size() const { return src.size(); }
  bool empty() const { return src.empty(); }

  void add(std::size_t s, std::size_t d, const RelDescriptor& r) {
    src.push_back(s);
    dst.push_back(d);
    const auto f = rel_features(r);
    rel.insert(rel.end(), f.begin(), f.end());
  }

  nn::Tensor rel_tensor() const { return nn::input_rows(kRelFeatureDim, rel); }
};

// ---------------------------------------------------------------------------
// Map inputs

struct MapInputs {
  std::vector<std::string> ids;
  std::vector<SpacetimePose> entries;
  std::vector<std::vector<Vec2>> points;
  std::vector<std::size_t> point_offset;  // first point row of each polygon
  std::vector<double> point_x;            // [points x kPointFeatureDim]
  std::vector<double> polygon_x;          // [polygons x kPolygonFeatureDim]
  EdgeList lp;  // point row -> polygon
  EdgeList ll;  // polygon -> polygon, entries within r_lane, self included
  std::uint64_t fingerprint = 0;

  std::size_t size() const { return ids.size(); }
};

namespace encoder_detail {

inline void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
}
inline void mix(std::uint64_t& h, double v) { mix(h, std::bit_cast<std::uint64_t>(v)); }
inline void mix(std::uint64_t& h, const std::string& s) {
  mix(h, static_cast<std::uint64_t>(s.size()));
  for (char c : s) mix(h, static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
}

inline double segment_heading(const std::vector<Vec2>& pts, std::size_t i) {
  const std::size_t a = i + 1 < pts.size() ? i : i - 1;
  const Vec2 d = pts[a + 1] - pts[a];
  return std::atan2(d.y, d.x);
}

inline double polyline_length(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) s += (pts[i] - pts[i - 1]).norm();
  return s;
}

}  // namespace encoder_detail

inline MapInputs prepare_map(const std::vector<MapPolygon>& map, const EncoderConfig& cfg) {
  using namespace encoder_detail;
  MapInputs m;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& poly : map) {
    const std::size_t pi = m.ids.size();
    m.ids.push_back(poly.id);
    m.entries.push_back(pose_of(poly));
    m.points.push_back(poly.points);
    m.point_offset.push_back(m.point_x.size() / kPointFeatureDim);
    const bool lane = poly.kind == PolygonKind::lane;
    const bool controlled = poly.controlling_signal.has_value();
    const auto& e = poly.entry;
    for (std::size_t i = 0; i < poly.points.size(); ++i) {
      const Vec2 local = to_local(poly.points[i], e.position, e.heading);
      const double dir = segment_heading(poly.points, i) - e.heading;
      m.point_x.insert(m.point_x.end(),
                       {local.x / 10.0, local.y / 10.0, std::sin(dir), std::cos(dir),
                        lane ? 1.0 : 0.0, lane ? 0.0 : 1.0, controlled ? 1.0 : 0.0});
      const SpacetimePose pt{poly.points[i], wrap_angle(segment_heading(poly.points, i)),
                             std::nullopt};
      m.lp.add(m.point_x.size() / kPointFeatureDim - 1, pi, rel_descriptor(m.entries[pi], pt));
    }
    m.polygon_x.insert(m.polygon_x.end(), {lane ? 1.0 : 0.0, lane ? 0.0 : 1.0,
                                           controlled ? 1.0 : 0.0,
                                           polyline_length(poly.points) / 50.0});
    mix(h, poly.id);
    mix(h, static_cast<std::uint64_t>(poly.kind));
    mix(h, poly.controlling_signal.value_or(""));
    mix(h, e.position.x);
    mix(h, e.position.y);
    mix(h, e.heading);
    for (const auto& p : poly.points) {
      mix(h, p.x);
      mix(h, p.y);
    }
  }
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if ((m.entries[j].position - m.entries[i].position).norm() <= cfg.r_lane)
        m.ll.add(j, i, rel_descriptor(m.entries[i], m.entries[j]));
  m.fingerprint = h;
  return m;
}

// ---------------------------------------------------------------------------
// Agent inputs

struct TokenSlot {
  View view = View::ego;
  std::string track;
  int frame = 0;
  AgentState state;
  ControlRegion region;
  SignalTrend trend;
};

struct GraphStats {
  std::size_t same_signal = 0;
  std::size_t radius = 0;
  std::size_t full = 0;  // all ordered pairs of co-present agents

  std::size_t gated() const { return same_signal + radius; }
  double saved_fraction() const {
    return full ? 1.0 - static_cast<double>(gated()) / static_cast<double>(full) : 0.0;
  }
};

using TrackKey = std::pair<View, std::string>;

struct EncoderInputs {
  int history_frames = 0;
  int first_frame = 0;  // first encoded frame
  std::vector<TokenSlot> slots;
  std::map<TrackKey, std::vector<std::size_t>> track_rows;
  std::vector<double> agent_x;   // [slots x kAgentFeatureDim]
  std::vector<double> signal_x;  // [slots x kSignalFeatureDim]
  EdgeList st;                   // history slot -> current slot, same track
  EdgeList ma;                   // polygon -> slot
  EdgeList ss;                   // slot -> slot, same view and frame
  std::vector<bool> ss_same_signal;
  GraphStats graph;
  MapInputs map;

  std::size_t size() const { return slots.size(); }
  std::size_t ego_count() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.view == View::ego;
    return n;
  }
};

namespace encoder_detail {

inline double min_point_distance(Vec2 p, const std::vector<Vec2>& pts) {
  double best = 1e300;
  for (const auto& q : pts) best = std::min(best, (q - p).squared_norm());
  return std::sqrt(best);
}

inline void append_agent_features(std::vector<double>& out, const AgentState& s,
                                  const AgentState* prev, const SignalTrend& trend,
                                  int history_frames, bool color = true) {
  double disp = 0.0, ds = 0.0, dc = 0.0;
  if (prev) {
    const Vec2 d = s.position - prev->position;
    const double gap = static_cast<double>(s.frame - prev->frame);
    disp = d.norm() / gap;
    if (d.norm() > 1e-9) {
      const double a = std::atan2(d.y, d.x) - s.yaw;
      ds = std::sin(a);
      dc = std::cos(a);
    }
  }
  const double speed = s.velocity.norm();
  double vs = 0.0, vc = 0.0;
  if (speed > 1e-9) {
    const double a = std::atan2(s.velocity.y, s.velocity.x) - s.yaw;
    vs = std::sin(a);
    vc = std::cos(a);
  }
  const int cat = static_cast<int>(s.category);
  const int col = color ? static_cast<int>(trend.color) : -1;
  const bool c = trend.controlled;
  out.insert(out.end(),
             {disp, ds, dc, speed / 10.0, vs, vc, cat == 0 ? 1.0 : 0.0, cat == 1 ? 1.0 : 0.0,
              cat == 2 ? 1.0 : 0.0, c ? 1.0 : 0.0, c ? trend.value : 0.0,
              c && col == 0 ? 1.0 : 0.0, c && col == 1 ? 1.0 : 0.0, c && col == 2 ? 1.0 : 0.0,
              static_cast<double>(s.frame - (history_frames - 1)) / 10.0,
              prev ? 1.0 : 0.0});
}

inline void append_signal_features(std::vector<double>& out, const SignalTrend& t,
                                   bool color = true) {
  const int col = color ? static_cast<int>(t.color) : -1;
  const bool c = t.controlled;
  out.insert(out.end(), {c ? 1.0 : 0.0, c ? t.value : 0.0, c && col == 0 ? 1.0 : 0.0,
                         c && col == 1 ? 1.0 : 0.0, c && col == 2 ? 1.0 : 0.0});
}

}  // namespace encoder_detail

// Polygons whose nearest sample point lies within `radius` of `p`.
inline std::vector<std::size_t> polygons_near(Vec2 p, const MapInputs& m, double radius) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (encoder_detail::min_point_distance(p, m.points[j]) <= radius) out.push_back(j);
  return out;
}

inline int encoded_first_frame(int history_frames, const EncoderConfig& cfg) {
  return cfg.encode_frames > 0 ? std::max(0, history_frames - cfg.encode_frames) : 0;
}

// Builds every encoder input of a scene. Signal context is dropped entirely
// when `use_signals` is off: features read as uncontrolled and the social
// graph keeps only radius edges.
inline EncoderInputs prepare_encoder(const Scene& scene, const EncoderConfig& cfg,
                                     bool use_signals) {
  using namespace encoder_detail;
  EncoderInputs in;
  in.history_frames = scene.history_frames;
  in.first_frame = encoded_first_frame(scene.history_frames, cfg);
  in.map = prepare_map(scene.map, cfg);
  const int H = scene.history_frames;

  for (View v : {View::ego, View::other}) {
    for (const auto& [id, track] : scene.tracks(v)) {
      const AgentState* prev = nullptr;
      auto& rows = in.track_rows[{v, id}];
      for (const auto& [f, s] : track.states) {
        if (f >= H) break;
        if (f >= in.first_frame) {
          TokenSlot slot;
          slot.view = v;
          slot.track = id;
          slot.frame = f;
          slot.state = s;
          if (use_signals) {
            slot.region = control_region(s.position, scene.map);
            if (slot.region.signal_id)
              if (const auto* sched = scene.signal(*slot.region.signal_id))
                slot.trend = signal_trend(*sched, f);
          }
          append_agent_features(in.agent_x, s, prev, slot.trend, H, cfg.signal_color);
          append_signal_features(in.signal_x, slot.trend, cfg.signal_color);
          rows.push_back(in.slots.size());
          in.slots.push_back(std::move(slot));
        }
        prev = &s;
      }
      if (rows.empty()) in.track_rows.erase({v, id});
    }
  }

  // Temporal edges: history window [t - tau, t - 1] of the same track.
  for (const auto& [key, rows] : in.track_rows) {
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const auto& cur = in.slots[rows[a]];
      for (std::size_t b = 0; b < a; ++b) {
        const auto& past = in.slots[rows[b]];
        if (cfg.tau_history > 0 && cur.frame - past.frame > cfg.tau_history) continue;
        in.st.add(rows[b], rows[a], rel_descriptor(pose_of(cur.state), pose_of(past.state)));
      }
    }
  }

  // Map edges.
  for (std::size_t i = 0; i < in.slots.size(); ++i) {
    const auto& s = in.slots[i];
    for (auto j : polygons_near(s.state.position, in.map, cfg.r_map))
      in.ma.add(j, i, rel_descriptor(pose_of(s.state), in.map.entries[j]));
  }

  // Social edges per (view, frame).
  std::map<std::pair<View, int>, std::vector<std::size_t>> by_frame;
  for (std::size_t i = 0; i < in.slots.size(); ++i)
    by_frame[{in.slots[i].view, in.slots[i].frame}].push_back(i);
  for (const auto& [key, rows] : by_frame) {
    for (auto i : rows) {
      const auto& si = in.slots[i];
      for (auto j : rows) {
        if (i == j) continue;
        ++in.graph.full;
        const auto& sj = in.slots[j];
        const bool same = si.region.signal_id && si.region.signal_id == sj.region.signal_id;
        const bool near = (sj.state.position - si.state.position).norm() <= cfg.r_social;
        if (!same && !near) continue;
        in.ss.add(j, i, rel_descriptor(pose_of(si.state), pose_of(sj.state)));
        in.ss_same_signal.push_back(same);
        ++(same ? in.graph.same_signal : in.graph.radius);
      }
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// Weights

struct EncoderWeights {
  nn::FourierEmbed agent_embed, point_embed, polygon_embed;
  nn::FourierEmbed rel_st, rel_ma, rel_ss, rel_lp, rel_ll;
  nn::RelAttentionBlock lp, ll;
  std::vector<nn::RelAttentionBlock> st, ma, ss;  // one per round

  static EncoderWeights make(nn::ParameterStore& s, const EncoderConfig& c, Rng& rng) {
    const auto d = static_cast<std::size_t>(c.d_model);
    const auto h = static_cast<std::size_t>(c.heads);
    const auto hid = static_cast<std::size_t>(c.hidden);
    const auto nf = static_cast<std::size_t>(c.n_freq);
    EncoderWeights w;
    w.agent_embed = nn::FourierEmbed::make(s, "enc.agent", kAgentFeatureDim, nf, d, rng);
    w.point_embed = nn::FourierEmbed::make(s, "enc.point", kPointFeatureDim, nf, d, rng);
    w.polygon_embed = nn::FourierEmbed::make(s, "enc.polygon", kPolygonFeatureDim, nf, d, rng);
    w.rel_st = nn::FourierEmbed::make(s, "enc.rel_st", kRelFeatureDim, nf, d, rng);
    w.rel_ma = nn::FourierEmbed::make(s, "enc.rel_ma", kRelFeatureDim, nf, d, rng);
    w.rel_ss = nn::FourierEmbed::make(s, "enc.rel_ss", kRelFeatureDim, nf, d, rng);
    w.rel_lp = nn::FourierEmbed::make(s, "enc.rel_lp", kRelFeatureDim, nf, d, rng);
    w.rel_ll = nn::FourierEmbed::make(s, "enc.rel_ll", kRelFeatureDim, nf, d, rng);
    w.lp = nn::RelAttentionBlock::make(s, "enc.lp", d, h, hid, rng);
    w.ll = nn::RelAttentionBlock::make(s, "enc.ll", d, h, hid, rng);
    for (int r = 0; r < c.rounds; ++r) {
      const std::string tag = std::to_string(r);
      w.st.push_back(nn::RelAttentionBlock::make(s, "enc.st" + tag, d, h, hid, rng, true,
                                                 kSignalFeatureDim));
      w.ma.push_back(nn::RelAttentionBlock::make(s, "enc.ma" + tag, d, h, hid, rng));
      w.ss.push_back(nn::RelAttentionBlock::make(s, "enc.ss" + tag, d, h, hid, rng));
    }
    return w;
  }
};

// ---------------------------------------------------------------------------
// Map encoding and the feature cache

namespace encoder_detail {

inline EdgeList filter_edges(const EdgeList& e, const std::vector<long>& src_map,
                             const std::vector<long>& dst_map) {
  EdgeList out;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const long s = src_map[e.src[k]], d = dst_map[e.dst[k]];
    if (s < 0 || d < 0) continue;
    out.src.push_back(static_cast<std::size_t>(s));
    out.dst.push_back(static_cast<std::size_t>(d));
    out.rel.insert(out.rel.end(), e.rel.begin() + static_cast<long>(k * kRelFeatureDim),
                   e.rel.begin() + static_cast<long>((k + 1) * kRelFeatureDim));
  }
  return out;
}

inline nn::Tensor attend(nn::Binding& p, const nn::RelAttentionBlock& block,
                         const nn::FourierEmbed& rel_embed, const nn::Tensor& x_dst,
                         const nn::Tensor& x_src, const EdgeList& e,
                         const nn::Tensor* extra = nullptr) {
  if (e.empty()) return x_dst;
  const nn::Tensor rel = rel_embed(p, e.rel_tensor());
  return block(p, x_dst, x_src, e.src, e.dst, &rel, extra);
}

}  // namespace encoder_detail

// Full-map encoding: polygon queries attend their own points (LP-A), then
// neighbouring polygons (LL-A). Returns [polygons x d].
inline nn::Tensor encode_map(nn::Binding& p, const EncoderWeights& w, const MapInputs& m) {
  using encoder_detail::attend;
  const nn::Tensor points = w.point_embed(p, nn::input_rows(kPointFeatureDim, m.point_x));
  nn::Tensor poly = w.polygon_embed(p, nn::input_rows(kPolygonFeatureDim, m.polygon_x));
  poly = attend(p, w.lp, w.rel_lp, poly, points, m.lp);
  return attend(p, w.ll, w.rel_ll, poly, poly, m.ll);
}

// Encodes only what the polygons in `needed` require: their LL-A neighbours
// and those neighbours' points. Rows come back in `needed` order and are
// bitwise equal to the matching rows of encode_map. Returns the number of
// polygons passed through LP-A in `encoded`.
inline nn::Tensor encode_map_subset(nn::Binding& p, const EncoderWeights& w, const MapInputs& m,
                                    const std::vector<std::size_t>& needed,
                                    std::size_t* encoded = nullptr) {
  using namespace encoder_detail;
  std::vector<bool> need(m.size(), false), keep(m.size(), false);
  for (auto j : needed) need[j] = keep[j] = true;
  for (std::size_t k = 0; k < m.ll.size(); ++k)
    if (need[m.ll.dst[k]]) keep[m.ll.src[k]] = true;
  std::vector<long> poly_map(m.size(), -1), need_map(m.size(), -1);
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (keep[j]) {
      poly_map[j] = static_cast<long>(kept.size());
      if (need[j]) need_map[j] = poly_map[j];
      kept.push_back(j);
    }
  if (encoded) *encoded = kept.size();
  const std::size_t n_points = m.point_x.size() / kPointFeatureDim;
  std::vector<long> point_map(n_points, -1);
  std::vector<double> px, polyx;
  long next = 0;
  for (auto j : kept) {
    const std::size_t begin = m.point_offset[j];
    const std::size_t end = begin + m.points[j].size();
    for (std::size_t r = begin; r < end; ++r) {
      point_map[r] = next++;
      px.insert(px.end(), m.point_x.begin() + static_cast<long>(r * kPointFeatureDim),
                m.point_x.begin() + static_cast<long>((r + 1) * kPointFeatureDim));
    }
    polyx.insert(polyx.end(), m.polygon_x.begin() + static_cast<long>(j * kPolygonFeatureDim),
                 m.polygon_x.begin() + static_cast<long>((j + 1) * kPolygonFeatureDim));
  }
  const EdgeList lp = filter_edges(m.lp, point_map, poly_map);
  const EdgeList ll = filter_edges(m.ll, poly_map, need_map);
  const nn::Tensor points = w.point_embed(p, nn::input_rows(kPointFeatureDim, px));
  nn::Tensor poly = w.polygon_embed(p, nn::input_rows(kPolygonFeatureDim, polyx));
  poly = attend(p, w.lp, w.rel_lp, poly, points, lp);
  poly = attend(p, w.ll, w.rel_ll, poly, poly, ll);
  std::vector<std::size_t> rows;
  rows.reserve(needed.size());
  for (auto j : needed) rows.push_back(static_cast<std::size_t>(poly_map[j]));
  return nn::gather_rows(poly, rows);
}

struct CacheStats {
  std::uint64_t recomputes = 0;  // map-feature builds
  std::uint64_t hits = 0;        // polygon features read by attention
  std::uint64_t misses = 0;      // reads that found no valid entry
  std::uint64_t polygon_encodings = 0;
};

// Polygon features keyed by (map fingerprint, weights version, binding).
// The binding part only matters for trainable passes, whose tensors belong
// to one tape.
class MapFeatureCache {
 public:
  explicit MapFeatureCache(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }

  // Features of the polygons in `needed`, one row each, in order.
  nn::Tensor rows(nn::Binding& p, const EncoderWeights& w, const MapInputs& m,
                  const std::vector<std::size_t>& needed) {
    if (!enabled_) {
      std::size_t encoded = 0;
      nn::Tensor out = encode_map_subset(p, w, m, needed, &encoded);
      recomputes_.fetch_add(1);
      misses_.fetch_add(needed.size());
      polygon_encodings_.fetch_add(encoded);
      return out;
    }
    return nn::gather_rows(table(p, w, m), needed);
  }

  // Whole table; builds it when the key changed.
  nn::Tensor table(nn::Binding& p, const EncoderWeights& w, const MapInputs& m) {
    const Key key{m.fingerprint, p.store().version(), p.trainable() ? p.serial() : 0};
    std::lock_guard<std::mutex> lock(mu_);
    if (!valid_ || !(key == key_)) {
      features_ = encode_map(p, w, m);
      key_ = key;
      valid_ = true;
      recomputes_.fetch_add(1);
      misses_.fetch_add(1);
      polygon_encodings_.fetch_add(m.size());
    }
    return features_;
  }

  void count_hits(std::uint64_t n) { hits_.fetch_add(n); }

  CacheStats stats() const {
    return {recomputes_.load(), hits_.load(), misses_.load(), polygon_encodings_.load()};
  }

  void reset_stats() {
    recomputes_ = 0;
    hits_ = 0;
    misses_ = 0;
    polygon_encodings_ = 0;
  }

  void invalidate() {
    std::lock_guard<std::mutex> lock(mu_);
    valid_ = false;
    features_ = nn::Tensor();
  }

 private:
  struct Key {
    std::uint64_t fingerprint = 0, version = 0, serial = 0;
    friend bool operator==(const Key&, const Key&) = default;
  };

  bool enabled_;
  std::mutex mu_;
  bool valid_ = false;
  Key key_;
  nn::Tensor features_;
  std::atomic<std::uint64_t> recomputes_{0}, hits_{0}, misses_{0}, polygon_encodings_{0};
};

// Key/value source for polygon attention over `edges` (src = polygon index):
// the cached table with the original indices, or per-destination re-encodes
// laid out one row per edge when the cache is off.
struct PolygonSource {
  nn::Tensor x;
  std::vector<std::size_t> src;
};

inline PolygonSource polygon_source(nn::Binding& p, const EncoderWeights& w, const MapInputs& m,
                                    const EdgeList& edges, MapFeatureCache& cache) {
  PolygonSource out;
  if (edges.empty()) return out;
  if (cache.enabled()) {
    out.x = cache.table(p, w, m);
    out.src = edges.src;
    cache.count_hits(edges.size());
    return out;
  }
  std::vector<nn::Tensor> parts;
  std::size_t k = 0;
  while (k < edges.size()) {
    std::size_t e = k;
    std::vector<std::size_t> needed;
    while (e < edges.size() && edges.dst[e] == edges.dst[k]) needed.push_back(edges.src[e++]);
    parts.push_back(cache.rows(p, w, m, needed));
    k = e;
  }
  out.x = nn::concat_rows(parts);
  out.src.resize(edges.size());
  std::iota(out.src.begin(), out.src.end(), std::size_t{0});
  return out;
}

// ---------------------------------------------------------------------------
// Forward

// Agent tokens [slots x d] after the configured attention rounds.
inline nn::Tensor encode_agents(nn::Binding& p, const EncoderWeights& w, const EncoderInputs& in,
                                MapFeatureCache& cache, const AblationConfig& ab) {
  using encoder_detail::attend;
  nn::Tensor x = w.agent_embed(p, nn::input_rows(kAgentFeatureDim, in.agent_x));
  const nn::Tensor sig = nn::input_rows(kSignalFeatureDim, in.signal_x);
  nn::Tensor rel_st, rel_ma, rel_ss;
  if (ab.use_st_a && !in.st.empty()) rel_st = w.rel_st(p, in.st.rel_tensor());
  if (ab.use_ss_a && !in.ss.empty()) rel_ss = w.rel_ss(p, in.ss.rel_tensor());
  PolygonSource maps;
  if (ab.use_m_a && !in.ma.empty() && !w.ma.empty()) {
    rel_ma = w.rel_ma(p, in.ma.rel_tensor());
    maps = polygon_source(p, w, in.map, in.ma, cache);
  }
  for (std::size_t r = 0; r < w.st.size(); ++r) {
    if (ab.use_st_a && !in.st.empty())
      x = w.st[r](p, x, x, in.st.src, in.st.dst, &rel_st, &sig);
    if (ab.use_m_a && !in.ma.empty()) {
      if (r > 0 && cache.enabled()) cache.count_hits(in.ma.size());
      x = w.ma[r](p, x, maps.x, maps.src, in.ma.dst, &rel_ma);
    }
    if (ab.use_ss_a && !in.ss.empty())
      x = w.ss[r](p, x, x, in.ss.src, in.ss.dst, &rel_ss);
  }
  return x;
}

}  // namespace cotraj
