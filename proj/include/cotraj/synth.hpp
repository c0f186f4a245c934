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

// Synthetic signalized-intersection scenarios and identity perturbations.
//
// The generator lays out a four-arm (cross) or three-arm (tee) junction with
// incoming, outgoing and turning lanes plus crosswalks, runs a two-phase
// signal plan and moves agents along lane routes with a car-following law
// that stops at red and yellow lights when the stop is comfortable. Both
// views observe the same agents with identical geometry; the true ego/other
// correspondence is returned alongside the scene.
//
// apply_perturbations then injects tracker failures into history frames:
// identity switches between neighbouring agents (merges), fragmented tracks
// (splits), dropped observations and position jitter. Every injected change
// is logged so identities can be restored exactly.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "cotraj/common.hpp"
#include "cotraj/geometry.hpp"
#include "cotraj/rng.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

// ego track id -> other track id
using IdentityPairs = std::map<std::string, std::string>;

struct GeneratorConfig {
  int agents = 20;
  std::string layout = "cross";  // cross | tee
  int lanes_per_direction = 2;
  std::string profile = "v2x-traj-like";
  double cycle_seconds = 30.0;
  double arm_length = 200.0;
  double bicycle_fraction = 0.1;
  double pedestrian_fraction = 0.0;
  double other_view_fraction = 1.0;  // share of agents the other view also sees
  double min_speed = 6.0;
  double max_speed = 12.0;
};

struct GeneratedScene {
  Scene scene;
  IdentityPairs truth;
};

namespace synth_detail {

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kStopDistance = 12.0;  // stop line from the centre
inline constexpr double kControlledLength = 40.0;
inline constexpr double kSlotSpacing = 10.0;
inline constexpr double kYellowSeconds = 3.0;
inline constexpr double kComfortDecel = 6.0;
inline constexpr int kPrerollSteps = 30;

struct Arm {
  std::string name;
  double angle;  // outward direction
};

inline std::vector<Arm> arms_for(const std::string& layout) {
  if (layout == "cross")
    return {{"E", 0.0}, {"N", kPi / 2}, {"W", kPi}, {"S", -kPi / 2}};
  if (layout == "tee") return {{"E", 0.0}, {"W", kPi}, {"S", -kPi / 2}};
  throw ConfigError("unknown layout \"" + layout + "\" (expected cross or tee)");
}

inline const Arm* arm_at(const std::vector<Arm>& arms, double angle) {
  for (const auto& a : arms)
    if (std::abs(wrap_angle(a.angle - angle)) < 1e-6) return &a;
  return nullptr;
}

inline std::vector<Vec2> straight(Vec2 a, Vec2 b, double spacing) {
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
  std::vector<Vec2> out;
  for (int i = 0; i <= n; ++i) out.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return out;
}

inline std::vector<Vec2> bezier(Vec2 p0, Vec2 d0, Vec2 p3, Vec2 d1, int samples) {
  const double k = 0.5 * (p3 - p0).norm();
  const Vec2 p1 = p0 + d0 * k, p2 = p3 - d1 * k;
  std::vector<Vec2> out;
  for (int i = 0; i <= samples; ++i) {
    const double t = static_cast<double>(i) / samples, s = 1 - t;
    out.push_back(p0 * (s * s * s) + p1 * (3 * s * s * t) + p2 * (3 * s * t * t) +
                  p3 * (t * t * t));
  }
  return out;
}

inline double heading_of(Vec2 a, Vec2 b) { return wrap_angle(std::atan2(b.y - a.y, b.x - a.x)); }

inline std::vector<Vec2> lane_outline(const std::vector<Vec2>& center, double half) {
  std::vector<Vec2> left, right;
  for (std::size_t i = 0; i < center.size(); ++i) {
    const Vec2 a = center[i == 0 ? 0 : i - 1];
    const Vec2 b = center[i + 1 < center.size() ? i + 1 : i];
    const Vec2 t = b - a;
    const double n = t.norm();
    const Vec2 nrm = n > 0 ? Vec2{-t.y / n, t.x / n} : Vec2{0, 1};
    left.push_back(center[i] + nrm * half);
    right.push_back(center[i] - nrm * half);
  }
  std::vector<Vec2> out = right;
  out.insert(out.end(), left.rbegin(), left.rend());
  return out;
}

// Polyline with cumulative arc length for position / tangent lookups.
struct Path {
  std::vector<Vec2> pts;
  std::vector<double> cum;

  explicit Path(std::vector<Vec2> p) : pts(std::move(p)) {
    cum.push_back(0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
      cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  }
  double length() const { return cum.back(); }

  std::pair<Vec2, double> at(double s) const {
    if (s >= length()) {
      const Vec2 a = pts[pts.size() - 2], b = pts.back();
      const Vec2 dir = (b - a) * (1.0 / (b - a).norm());
      return {b + dir * (s - length()), heading_of(a, b)};
    }
    if (s <= 0) return {pts[0] + (pts[1] - pts[0]) * (s / (pts[1] - pts[0]).norm()),
                        heading_of(pts[0], pts[1])};
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin());
    const double seg = cum[i] - cum[i - 1];
    const double t = seg > 0 ? (s - cum[i - 1]) / seg : 0.0;
    return {pts[i - 1] + (pts[i] - pts[i - 1]) * t, heading_of(pts[i - 1], pts[i])};
  }
};

struct Route {
  std::vector<std::string> segments;  // polygon ids along the route
  std::vector<double> seg_start;      // arc length where each segment starts
  Path path{{{0, 0}, {1, 0}}};
  std::optional<std::string> signal;  // approach signal
  double stop_s = -1.0;               // arc length of the stop line, <0 if none
};

struct Agent {
  std::string key;
  Category category;
  Box box;
  Route route;
  double s = 0.0;
  double v = 0.0;
  double v0 = 10.0;
};

// Colour and remaining time of a two-phase plan at time t (seconds).
inline SignalRecord phase_at(double t, double offset, double cycle) {
  const double green = cycle / 2 - kYellowSeconds;
  double ph = std::fmod(t + offset, cycle);
  if (ph < 0) ph += cycle;
  if (ph < green) return {SignalColor::green, green - ph};
  if (ph < green + kYellowSeconds) return {SignalColor::yellow, green + kYellowSeconds - ph};
  return {SignalColor::red, cycle - ph};
}

}  // namespace synth_detail

inline GeneratedScene generate_synthetic(const GeneratorConfig& cfg, std::uint64_t seed) {
  using namespace synth_detail;
  if (cfg.agents < 0) throw ConfigError("agent count must be non-negative");
  if (cfg.lanes_per_direction < 1) throw ConfigError("lanes_per_direction must be >= 1");
  if (!(cfg.cycle_seconds > 2 * kYellowSeconds + 2))
    throw ConfigError("cycle_seconds too short for a two-phase plan");
  if (!(cfg.arm_length > kStopDistance + kControlledLength + 20))
    throw ConfigError("arm_length too short");
  for (double f : {cfg.bicycle_fraction, cfg.pedestrian_fraction, cfg.other_view_fraction})
    if (!(f >= 0 && f <= 1)) throw ConfigError("fractions must lie in [0, 1]");
  if (cfg.bicycle_fraction + cfg.pedestrian_fraction > 1)
    throw ConfigError("bicycle and pedestrian fractions exceed 1");
  if (!(cfg.min_speed > 0 && cfg.max_speed >= cfg.min_speed))
    throw ConfigError("speed range must be positive and ordered");
  const auto frames = profile_frames(cfg.profile);
  if (!frames) throw ConfigError("unknown profile \"" + cfg.profile + "\"");

  Rng rng(seed);
  const auto arms = arms_for(cfg.layout);
  const int L = cfg.lanes_per_direction;
  const double half_road = L * kLaneWidth;

  Scene scene;
  scene.scenario_id = "synth-" + std::to_string(seed);
  scene.profile = cfg.profile;
  scene.history_frames = frames->history;
  scene.future_frames = frames->future;

  auto signal_for = [&](const Arm& a) {
    return (a.name == "N" || a.name == "S") ? std::string("S1") : std::string("S2");
  };

  std::map<std::string, std::vector<Vec2>> centerline;
  auto add_lane = [&](const std::string& id, std::vector<Vec2> pts,
                      std::optional<std::string> sig) {
    MapPolygon p;
    p.id = id;
    p.kind = PolygonKind::lane;
    p.points = pts;
    p.entry = {pts[0], heading_of(pts[0], pts[1])};
    p.semantics = "vehicle";
    p.controlling_signal = sig;
    p.outline = lane_outline(pts, kLaneWidth / 2);
    centerline[id] = pts;
    scene.map.push_back(std::move(p));
  };

  auto app_id = [](const Arm& a, int i) { return "app_" + a.name + "_" + std::to_string(i); };
  auto in_id = [](const Arm& a, int i) { return "in_" + a.name + "_" + std::to_string(i); };
  auto out_id = [](const Arm& a, int i) { return "out_" + a.name + "_" + std::to_string(i); };

  for (const auto& a : arms) {
    const Vec2 u = rotate({1, 0}, a.angle), n = rotate({0, 1}, a.angle);
    // The approach is uncontrolled until kControlledLength before the stop line.
    for (int i = 0; i < L; ++i) {
      const double off = kLaneWidth * (i + 0.5);
      const double mid = kStopDistance + kControlledLength;
      add_lane(app_id(a, i), straight(u * cfg.arm_length + n * off, u * mid + n * off, 10.0),
               std::nullopt);
      add_lane(in_id(a, i), straight(u * mid + n * off, u * kStopDistance + n * off, 10.0),
               signal_for(a));
    }
    for (int i = 0; i < L; ++i) {
      const double off = kLaneWidth * (i + 0.5);
      add_lane(out_id(a, i),
               straight(u * kStopDistance - n * off, u * cfg.arm_length - n * off, 10.0),
               std::nullopt);
    }
  }

  // Turning and straight connectors; index by (arm, lane).
  struct Move {
    std::string connector;
    std::string out_lane;
  };
  std::map<std::string, std::vector<Move>> moves;
  for (const auto& a : arms) {
    for (int i = 0; i < L; ++i) {
      const std::string from = in_id(a, i);
      struct Option {
        const char* tag;
        double angle;
        int out_lane;
        bool allowed;
      };
      const Option options[] = {
          {"straight", a.angle + kPi, i, true},
          {"left", a.angle - kPi / 2, 0, L == 1 || i == 0},
          {"right", a.angle + kPi / 2, L - 1, L == 1 || i == L - 1},
      };
      std::vector<Move> allowed, fallback;
      for (const auto& o : options) {
        const Arm* target = arm_at(arms, o.angle);
        if (!target) continue;
        const std::string conn = "conn_" + a.name + "_" + std::to_string(i) + "_" + o.tag;
        const auto& src = centerline[from];
        const auto& dst = centerline[out_id(*target, o.out_lane)];
        const Vec2 d0 = rotate({1, 0}, heading_of(src[src.size() - 2], src.back()));
        const Vec2 d1 = rotate({1, 0}, heading_of(dst[0], dst[1]));
        add_lane(conn, bezier(src.back(), d0, dst[0], d1, 8), signal_for(a));
        (o.allowed ? allowed : fallback).push_back({conn, out_id(*target, o.out_lane)});
      }
      moves[from] = allowed.empty() ? fallback : allowed;
    }
  }

  std::vector<std::string> crosswalks;
  for (const auto& a : arms) {
    const Vec2 u = rotate({1, 0}, a.angle), n = rotate({0, 1}, a.angle);
    const double s = kStopDistance - 3.0;
    MapPolygon p;
    p.id = "cw_" + a.name;
    p.kind = PolygonKind::crosswalk;
    p.points = straight(u * s + n * (half_road + 2), u * s - n * (half_road + 2), 4.0);
    p.entry = {p.points[0], heading_of(p.points[0], p.points[1])};
    p.semantics = "pedestrian";
    p.outline = lane_outline(p.points, 1.5);
    centerline[p.id] = p.points;
    crosswalks.push_back(p.id);
    scene.map.push_back(std::move(p));
  }

  // Two-phase plan: S1 serves the north/south approaches, S2 east/west.
  const double offset = rng.uniform(0.0, cfg.cycle_seconds);
  std::map<std::string, double> signal_offset;
  for (const std::string sid : {"S1", "S2"}) {
    SignalSchedule sg;
    sg.id = sid;
    sg.cycle_seconds = cfg.cycle_seconds;
    for (const auto& p : scene.map)
      if (p.controlling_signal == sid) sg.lane_ids.push_back(p.id);
    if (sg.lane_ids.empty()) continue;
    signal_offset[sid] = offset + (sid == "S2" ? cfg.cycle_seconds / 2 : 0.0);
    for (int f = 0; f < scene.total_frames(); ++f)
      sg.records[f] = phase_at(frame_seconds(f), signal_offset[sid], cfg.cycle_seconds);
    scene.signals.push_back(std::move(sg));
  }

  // Place agents on incoming-lane slots (vehicles, bicycles) or crosswalks.
  std::vector<std::pair<std::string, double>> slots;
  for (const auto& a : arms)
    for (int i = 0; i < L; ++i)
      for (double back = 5.0; back + kStopDistance + 5.0 <= cfg.arm_length; back += kSlotSpacing)
        slots.emplace_back(in_id(a, i), back);
  std::vector<Category> cats(static_cast<std::size_t>(cfg.agents), Category::vehicle);
  int n_lane_agents = 0;
  for (auto& c : cats) {
    const double r = rng.uniform();
    if (r < cfg.pedestrian_fraction) c = Category::pedestrian;
    else if (r < cfg.pedestrian_fraction + cfg.bicycle_fraction) c = Category::bicycle;
    if (c != Category::pedestrian) ++n_lane_agents;
  }
  if (n_lane_agents > static_cast<int>(slots.size()))
    throw ConfigError("infeasible config: " + std::to_string(n_lane_agents) +
                      " road agents exceed lane capacity of " + std::to_string(slots.size()));
  for (std::size_t i = slots.size(); i > 1; --i)
    std::swap(slots[i - 1], slots[static_cast<std::size_t>(rng.integer(0, static_cast<long>(i) - 1))]);

  std::vector<Agent> agents;
  std::size_t next_slot = 0;
  for (int k = 0; k < cfg.agents; ++k) {
    Agent ag;
    ag.key = std::to_string(k);
    ag.category = cats[static_cast<std::size_t>(k)];
    Route& r = ag.route;
    if (ag.category == Category::pedestrian) {
      const auto& cw = centerline[crosswalks[static_cast<std::size_t>(
          rng.integer(0, static_cast<long>(crosswalks.size()) - 1))]];
      std::vector<Vec2> pts = cw;
      if (rng.bernoulli(0.5)) std::reverse(pts.begin(), pts.end());
      const Vec2 dir = (pts.back() - pts.front()) * (1.0 / (pts.back() - pts.front()).norm());
      pts.insert(pts.begin(), pts.front() - dir * 20.0);
      pts.push_back(pts.back() + dir * 20.0);
      r.path = Path(pts);
      r.segments = {"walk"};
      r.seg_start = {0.0};
      ag.box = {0.5, 0.5, 1.75};
      ag.v0 = rng.uniform(1.0, 1.6);
      ag.s = rng.uniform(0.0, 20.0);
      ag.v = ag.v0;
    } else {
      const auto& [lane, back] = slots[next_slot++];
      const auto& options = moves[lane];
      const Move mv = options[static_cast<std::size_t>(
          rng.integer(0, static_cast<long>(options.size()) - 1))];
      const std::string approach = "app" + lane.substr(2);
      std::vector<Vec2> pts = centerline[approach];
      const double app_len = Path(pts).length();
      const auto& near = centerline[lane];
      pts.insert(pts.end(), near.begin() + 1, near.end());
      const double in_len = Path(pts).length();
      const auto& conn = centerline[mv.connector];
      const double conn_len = Path(conn).length();
      pts.insert(pts.end(), conn.begin() + 1, conn.end());
      const auto& out = centerline[mv.out_lane];
      pts.insert(pts.end(), out.begin() + 1, out.end());
      r.path = Path(pts);
      r.segments = {approach, lane, mv.connector, mv.out_lane};
      r.seg_start = {0.0, app_len, in_len, in_len + conn_len};
      r.stop_s = in_len;
      for (const auto& p : scene.map)
        if (p.id == lane) r.signal = p.controlling_signal;
      if (ag.category == Category::bicycle) {
        ag.box = {1.8, 0.6, 1.7};
        ag.v0 = rng.uniform(4.0, 6.0);
      } else {
        ag.box = {rng.uniform(4.2, 5.0), rng.uniform(1.8, 2.0), 1.6};
        ag.v0 = rng.uniform(cfg.min_speed, cfg.max_speed);
      }
      ag.s = in_len - back + rng.uniform(-1.0, 1.0);
      ag.v = ag.v0 * rng.uniform(0.5, 1.0);
    }
    agents.push_back(std::move(ag));
  }
  std::vector<bool> other_sees(agents.size(), true);
  for (std::size_t k = 0; k < agents.size(); ++k)
    other_sees[k] = rng.uniform() < cfg.other_view_fraction;

  auto segment_of = [](const Route& r, double s) {
    std::size_t i = 0;
    while (i + 1 < r.seg_start.size() && s >= r.seg_start[i + 1]) ++i;
    return i;
  };

  // Intelligent-driver-style acceleration held constant over each 0.1 s step.
  auto step = [&](double t) {
    std::vector<double> acc(agents.size(), 0.0);
    for (std::size_t k = 0; k < agents.size(); ++k) {
      Agent& a = agents[k];
      if (a.category == Category::pedestrian) continue;
      const double amax = 1.5, b = 2.0, s0 = 2.0, T = 1.2;
      double gap = 1e9, lead_v = 0.0;
      const std::size_t seg = segment_of(a.route, a.s);
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j == k || agents[j].category == Category::pedestrian) continue;
        const Agent& o = agents[j];
        const std::size_t oseg = segment_of(o.route, o.s);
        const std::string& oid = o.route.segments[oseg];
        for (std::size_t q = seg; q < a.route.segments.size() && q <= seg + 1; ++q) {
          if (a.route.segments[q] != oid) continue;
          const double o_pos = o.s - o.route.seg_start[oseg];
          const double my_pos = a.s - a.route.seg_start[q];
          const double d = o_pos - my_pos - 0.5 * (a.box.length + o.box.length);
          if (o_pos > my_pos && d < gap) {
            gap = d;
            lead_v = o.v;
          }
        }
      }
      if (a.route.signal && a.route.stop_s > 0) {
        const double to_stop = a.route.stop_s - a.s - 0.5 * a.box.length;
        if (to_stop > -0.5) {
          const auto rec = phase_at(t, signal_offset[*a.route.signal], cfg.cycle_seconds);
          const double need = a.v * a.v / (2.0 * std::max(to_stop, 0.1));
          if (rec.color != SignalColor::green && need <= kComfortDecel && to_stop < gap) {
            gap = to_stop;
            lead_v = 0.0;
          }
        }
      }
      const double star = s0 + a.v * T + a.v * (a.v - lead_v) / (2.0 * std::sqrt(amax * b));
      double acc_k = amax * (1.0 - std::pow(a.v / a.v0, 4));
      if (gap < 1e8) acc_k -= amax * std::pow(std::max(star, 0.0) / std::max(gap, 0.1), 2);
      acc[k] = std::clamp(acc_k, -8.0, amax);
    }
    const double dt = 1.0 / kFrameRateHz;
    for (std::size_t k = 0; k < agents.size(); ++k) {
      Agent& a = agents[k];
      const double v1 = std::max(0.0, a.v + acc[k] * dt);
      a.s += 0.5 * (a.v + v1) * dt;
      a.v = v1;
    }
  };

  for (int i = -kPrerollSteps; i < 0; ++i) step(frame_seconds(i));
  for (int f = 0; f < scene.total_frames(); ++f) {
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const Agent& a = agents[k];
      const auto [pos, heading] = a.route.path.at(a.s);
      AgentState st;
      st.position = pos;
      st.yaw = heading;
      st.velocity = rotate({a.v, 0.0}, heading);
      st.box = a.box;
      st.category = a.category;
      st.frame = f;
      for (View v : {View::ego, View::other}) {
        if (v == View::other && !other_sees[k]) continue;
        const std::string id = (v == View::ego ? "e" : "o") + a.key;
        Track& t = scene.tracks(v)[id];
        t.id = id;
        t.view = v;
        t.states[f] = st;
      }
    }
    step(frame_seconds(f));
  }

  GeneratedScene out;
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const std::string e = "e" + agents[k].key;
    if (other_sees[k]) out.truth[e] = "o" + agents[k].key;
    const Track& t = scene.ego_tracks[e];
    if (t.present(scene.history_frames - 1) && t.last_frame() >= scene.history_frames)
      scene.target_ids.push_back(e);
  }
  out.scene = std::move(scene);
  return out;
}

// ---------------------------------------------------------------------------
// Perturbations

struct PerturbationSpec {
  double position_noise_sigma = 0.0;
  double id_split_rate = 0.0;
  double id_merge_rate = 0.0;
  double occlusion_rate = 0.0;
  std::uint64_t seed = 0;
  bool perturb_ego = true;
  bool perturb_other = true;

  void validate() const {
    for (double r : {id_split_rate, id_merge_rate, occlusion_rate})
      if (!(r >= 0 && r <= 1)) throw ConfigError("perturbation rates must lie in [0, 1]");
    if (!(position_noise_sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
  }
};

// `head_id` received the states before `cut_frame`; the original id kept the rest.
struct SplitEdit {
  View view;
  std::string track_id;
  int cut_frame;
  std::string head_id;
};

// Identity switch between two neighbours at `cut_frame`: `first_id` continues
// with the second agent's states, `second_id` keeps only the second agent's
// earlier states and `fresh_id` carries the first agent's later states.
struct MergeEdit {
  View view;
  std::string first_id;
  std::string second_id;
  int cut_frame;
  std::string fresh_id;
};

struct OcclusionEdit {
  View view;
  std::string track_id;
  AgentState removed;
};

struct NoiseDraw {
  View view;
  std::string track_id;
  int frame;
  double dx;
  double dy;
};

struct EditLog {
  std::vector<MergeEdit> merges;
  std::vector<SplitEdit> splits;
  std::vector<OcclusionEdit> occlusions;
  std::vector<NoiseDraw> noise;

  bool empty() const {
    return merges.empty() && splits.empty() && occlusions.empty() && noise.empty();
  }
};

// Which original track each perturbed state came from.
using StateKey = std::tuple<int, int, std::uint64_t, std::uint64_t>;  // view, frame, x, y

inline StateKey state_key(View v, const AgentState& s) {
  return {static_cast<int>(v), s.frame, std::bit_cast<std::uint64_t>(s.position.x),
          std::bit_cast<std::uint64_t>(s.position.y)};
}

using OriginIndex = std::map<StateKey, std::string>;

struct PerturbResult {
  Scene scene;
  EditLog log;
  OriginIndex origin;
};

namespace synth_detail {

inline std::map<int, AgentState> take_range(std::map<int, AgentState>& m, int from, int to) {
  std::map<int, AgentState> out;
  for (auto it = m.lower_bound(from); it != m.end() && it->first < to;) {
    out.insert(*it);
    it = m.erase(it);
  }
  return out;
}

inline std::string unique_id(const TrackSet& ts, const std::string& base) {
  std::string id = base;
  for (int n = 2; ts.count(id); ++n) id = base + std::to_string(n);
  return id;
}

}  // namespace synth_detail

// `truth` (ego id -> other id), when given, limits edits to one per real
// agent across both views.
inline PerturbResult apply_perturbations(const Scene& input, const PerturbationSpec& spec,
                                         const IdentityPairs* truth = nullptr) {
  using namespace synth_detail;
  spec.validate();
  PerturbResult res;
  res.scene = input;
  Scene& s = res.scene;
  Rng rng(spec.seed);
  const int H = s.history_frames;

  // Per-state provenance: (view, frame) slot -> original track id.
  std::map<std::tuple<int, std::string, int>, std::string> prov;
  for (View v : {View::ego, View::other})
    for (const auto& [id, t] : s.tracks(v))
      for (const auto& [f, st] : t.states) prov[{static_cast<int>(v), id, f}] = id;
  auto move_prov = [&](View v, const std::string& from, const std::string& to,
                       const std::map<int, AgentState>& states) {
    for (const auto& [f, st] : states) {
      const auto key = std::tuple{static_cast<int>(v), from, f};
      const std::string origin = prov.at(key);
      prov.erase(key);
      prov[{static_cast<int>(v), to, f}] = origin;
    }
  };

  std::set<std::string> edited;  // real-agent keys
  std::map<std::string, std::string> agent_of_other;
  if (truth)
    for (const auto& [e, o] : *truth) agent_of_other[o] = e;
  auto agent_key = [&](View v, const std::string& id) {
    if (!truth) return std::string(to_string(v)) + ":" + id;
    if (v == View::ego) return id;
    auto it = agent_of_other.find(id);
    return it == agent_of_other.end() ? "other:" + id : it->second;
  };

  std::vector<View> views;
  if (spec.perturb_ego) views.push_back(View::ego);
  if (spec.perturb_other) views.push_back(View::other);

  // Identity switches between neighbours sharing at least 20 history frames
  // within 10 m of each other; the switch falls in the middle of the shared span.
  if (spec.id_merge_rate > 0) {
    for (View v : views) {
      TrackSet& ts = s.tracks(v);
      std::vector<std::string> ids;
      for (const auto& [id, t] : ts) ids.push_back(id);
      std::vector<std::pair<std::string, std::string>> pairs;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          const Track &a = ts[ids[i]], &b = ts[ids[j]];
          int common = 0;
          double closest = 1e300;
          for (const auto& [f, sa] : a.states) {
            if (f >= H) break;
            if (const AgentState* sb = b.at(f)) {
              ++common;
              closest = std::min(closest, (sa.position - sb->position).norm());
            }
          }
          if (common >= 20 && closest <= 10.0) pairs.emplace_back(ids[i], ids[j]);
        }
      for (std::size_t i = pairs.size(); i > 1; --i)
        std::swap(pairs[i - 1], pairs[static_cast<std::size_t>(rng.integer(0, static_cast<long>(i) - 1))]);
      for (const auto& [ia, ib] : pairs) {
        const bool fire = rng.bernoulli(spec.id_merge_rate);
        if (!fire) continue;
        if (edited.count(agent_key(v, ia)) || edited.count(agent_key(v, ib))) continue;
        std::vector<int> common;
        for (const auto& [f, st] : ts[ia].states)
          if (f < H && ts[ib].present(f)) common.push_back(f);
        const double lo = 0.35 * (common.size() - 1), hi = 0.65 * (common.size() - 1);
        const auto pick = static_cast<std::size_t>(std::lround(rng.uniform(lo, hi)));
        const int c = common[std::max<std::size_t>(pick, 1)];
        MergeEdit e{v, ia, ib, c, unique_id(ts, ia + ".x")};
        auto a_tail = take_range(ts[ia].states, c, 1 << 30);
        auto b_tail = take_range(ts[ib].states, c, 1 << 30);
        move_prov(v, ia, e.fresh_id, a_tail);
        move_prov(v, ib, ia, b_tail);
        Track fresh{e.fresh_id, v, {}};
        for (auto [f, st] : a_tail) fresh.states[f] = st;
        for (auto [f, st] : b_tail) ts[ia].states[f] = st;
        ts[e.fresh_id] = std::move(fresh);
        if (ts[ib].states.empty()) ts.erase(ib);
        edited.insert(agent_key(v, ia));
        edited.insert(agent_key(v, ib));
        res.log.merges.push_back(std::move(e));
      }
    }
  }

  // Fragmented tracks: the head before the cut gets a new id.
  if (spec.id_split_rate > 0) {
    for (View v : views) {
      TrackSet& ts = s.tracks(v);
      std::vector<std::string> ids;
      for (const auto& [id, t] : ts) ids.push_back(id);
      for (const auto& id : ids) {
        const bool fire = rng.bernoulli(spec.id_split_rate);
        if (!fire || edited.count(agent_key(v, id)) || !input.tracks(v).count(id)) continue;
        std::vector<int> hist;
        for (const auto& [f, st] : ts[id].states)
          if (f < H) hist.push_back(f);
        if (hist.size() < 10) continue;
        const double lo = 0.35 * (hist.size() - 1), hi = 0.65 * (hist.size() - 1);
        const int c = hist[static_cast<std::size_t>(std::lround(rng.uniform(lo, hi)))];
        SplitEdit e{v, id, c, unique_id(ts, id + ".h")};
        auto head = take_range(ts[id].states, -(1 << 30), c);
        move_prov(v, id, e.head_id, head);
        ts[e.head_id] = Track{e.head_id, v, std::move(head)};
        edited.insert(agent_key(v, id));
        res.log.splits.push_back(std::move(e));
      }
    }
  }

  // Dropped history observations; the current frame is always kept.
  if (spec.occlusion_rate > 0) {
    for (View v : views) {
      for (auto& [id, t] : s.tracks(v)) {
        std::vector<int> drop;
        for (const auto& [f, st] : t.states)
          if (f < H - 1 && rng.bernoulli(spec.occlusion_rate)) drop.push_back(f);
        if (drop.size() >= t.states.size()) drop.pop_back();
        for (int f : drop) {
          res.log.occlusions.push_back({v, id, t.states.at(f)});
          t.states.erase(f);
          prov.erase({static_cast<int>(v), id, f});
        }
      }
    }
  }

  // Position jitter on history frames; yaw follows the jittered path when the
  // central difference spans at least 1 m.
  if (spec.position_noise_sigma > 0) {
    for (View v : views) {
      for (auto& [id, t] : s.tracks(v)) {
        for (auto& [f, st] : t.states) {
          if (f >= H) continue;
          const double dx = rng.normal(0.0, spec.position_noise_sigma);
          const double dy = rng.normal(0.0, spec.position_noise_sigma);
          st.position = st.position + Vec2{dx, dy};
          res.log.noise.push_back({v, id, f, dx, dy});
        }
        std::map<int, double> yaw;
        for (const auto& [f, st] : t.states) {
          if (f >= H) continue;
          const AgentState* prev = t.at(f - 1);
          const AgentState* next = t.at(f + 1);
          if (!prev || !next) continue;
          const Vec2 d = next->position - prev->position;
          if (d.norm() >= 1.0) yaw[f] = wrap_angle(std::atan2(d.y, d.x));
        }
        for (const auto& [f, y] : yaw) t.states[f].yaw = y;
      }
    }
  }

  for (View v : {View::ego, View::other})
    for (const auto& [id, t] : s.tracks(v))
      for (const auto& [f, st] : t.states)
        res.origin[state_key(v, st)] = prov.at({static_cast<int>(v), id, f});
  return res;
}

// Undoes identity edits and re-inserts dropped observations. Positions come
// back exactly only when no jitter was applied.
inline Scene restore_identities(const Scene& perturbed, const EditLog& log) {
  using namespace synth_detail;
  Scene s = perturbed;
  for (auto it = log.occlusions.rbegin(); it != log.occlusions.rend(); ++it)
    s.tracks(it->view)[it->track_id].states[it->removed.frame] = it->removed;
  for (auto it = log.splits.rbegin(); it != log.splits.rend(); ++it) {
    TrackSet& ts = s.tracks(it->view);
    auto head = ts.at(it->head_id).states;
    for (auto& [f, st] : head) ts[it->track_id].states[f] = st;
    ts.erase(it->head_id);
  }
  for (auto it = log.merges.rbegin(); it != log.merges.rend(); ++it) {
    TrackSet& ts = s.tracks(it->view);
    auto b_tail = take_range(ts.at(it->first_id).states, it->cut_frame, 1 << 30);
    Track& b = ts[it->second_id];
    b.id = it->second_id;
    b.view = it->view;
    for (auto& [f, st] : b_tail) b.states[f] = st;
    for (auto& [f, st] : ts.at(it->fresh_id).states) ts[it->first_id].states[f] = st;
    ts.erase(it->fresh_id);
  }
  return s;
}

}  // namespace cotraj
