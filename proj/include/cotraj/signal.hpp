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

// Traffic-signal features: the phase-trend scalar, control-region lookup and
// same-signal agent pairing.

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cotraj/polygon.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

// Wire value for agents outside any controlled region.
inline constexpr double kUncontrolledSentinel = -999.0;

// Half of the assumed lane width, used when a lane has no outline.
inline constexpr double kLaneHalfWidth = 1.75;

struct SignalTrend {
  bool controlled = false;
  double value = 0.0;  // meaningful only when controlled
  SignalColor color = SignalColor::red;
  std::optional<std::string> signal_id;
  friend bool operator==(const SignalTrend&, const SignalTrend&) = default;
};

// atan((remaining / cycle) * (d / 3)) with d the color code.
inline double trend_value(SignalColor color, double remaining, double cycle) {
  const double d = static_cast<double>(static_cast<int>(color));
  return std::atan((remaining / cycle) * (d / 3.0));
}

// A frame without a record yields an uncontrolled trend.
inline SignalTrend signal_trend(const SignalSchedule& s, int frame) {
  SignalTrend t;
  auto it = s.records.find(frame);
  if (it == s.records.end()) return t;
  t.controlled = true;
  t.color = it->second.color;
  t.value = trend_value(it->second.color, it->second.remaining, s.cycle_seconds);
  t.signal_id = s.id;
  return t;
}

inline nlohmann::ordered_json trend_to_json(const SignalTrend& t) {
  nlohmann::ordered_json j;
  j["trend"] = t.controlled ? t.value : kUncontrolledSentinel;
  j["signal"] = t.signal_id ? nlohmann::ordered_json(*t.signal_id)
                            : nlohmann::ordered_json(nullptr);
  j["color"] = t.controlled ? nlohmann::ordered_json(to_string(t.color))
                            : nlohmann::ordered_json(nullptr);
  return j;
}

inline SignalTrend trend_from_json(const nlohmann::ordered_json& j) {
  SignalTrend t;
  const double v = j.at("trend").get<double>();
  if (v == kUncontrolledSentinel) return t;
  t.controlled = true;
  t.value = v;
  if (j.contains("color") && j["color"].is_string()) {
    if (auto c = color_from(j["color"].get<std::string>())) t.color = *c;
  }
  if (j.contains("signal") && j["signal"].is_string())
    t.signal_id = j["signal"].get<std::string>();
  return t;
}

inline bool lane_contains(const MapPolygon& lane, Vec2 p) {
  if (lane.outline.size() >= 3) return point_in_polygon(p, lane.outline);
  return point_polyline_distance(p, lane.points) <= kLaneHalfWidth;
}

struct ControlRegion {
  std::optional<std::string> signal_id;
  bool ambiguous = false;  // point lay in lanes of different signals
  friend bool operator==(const ControlRegion&, const ControlRegion&) = default;
};

// Signal controlling the lane under `p`. When lanes of different signals
// overlap, the lane whose entry pose is closest wins and the result is
// flagged ambiguous.
inline ControlRegion control_region(Vec2 p, const std::vector<MapPolygon>& map) {
  ControlRegion r;
  double best = 0.0;
  for (const auto& lane : map) {
    if (lane.kind != PolygonKind::lane || !lane.controlling_signal) continue;
    if (!lane_contains(lane, p)) continue;
    const double d = (lane.entry.position - p).norm();
    if (!r.signal_id) {
      r.signal_id = lane.controlling_signal;
      best = d;
    } else if (*r.signal_id != *lane.controlling_signal) {
      r.ambiguous = true;
      if (d < best) {
        r.signal_id = lane.controlling_signal;
        best = d;
      }
    } else {
      best = std::min(best, d);
    }
  }
  return r;
}

struct AgentAt {
  std::string id;
  Vec2 position;
};

// Unordered pairs (first < second) of agents under the same signal.
inline std::set<std::pair<std::string, std::string>> same_signal_pairs(
    const std::vector<AgentAt>& agents, const std::vector<MapPolygon>& map) {
  std::vector<std::optional<std::string>> region;
  region.reserve(agents.size());
  for (const auto& a : agents) region.push_back(control_region(a.position, map).signal_id);
  std::set<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (!region[i]) continue;
    for (std::size_t j = i + 1; j < agents.size(); ++j) {
      if (region[j] != region[i]) continue;
      auto a = agents[i].id, b = agents[j].id;
      if (b < a) std::swap(a, b);
      out.emplace(a, b);
    }
  }
  return out;
}

// Per-(track, frame) signal context of one view.
struct AgentSignal {
  ControlRegion region;
  SignalTrend trend;
};

using SignalTable = std::map<std::string, std::map<int, AgentSignal>>;

inline SignalTable signal_table(const Scene& scene, const TrackSet& tracks) {
  SignalTable table;
  for (const auto& [id, t] : tracks) {
    auto& rows = table[id];
    for (const auto& [f, s] : t.states) {
      AgentSignal a;
      a.region = control_region(s.position, scene.map);
      if (a.region.signal_id) {
        if (const auto* sched = scene.signal(*a.region.signal_id))
          a.trend = signal_trend(*sched, f);
      }
      rows[f] = a;
    }
  }
  return table;
}

}  // namespace cotraj
