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

// Scenario vocabulary: agent states, per-view tracks, map polygons, signal
// schedules and the scene snapshot that ties them together.
//
// Frames are integer indices on a 10 Hz grid. A missing observation is an
// absent map entry, never a placeholder state.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cotraj/common.hpp"

namespace cotraj {

enum class Category { pedestrian = 0, bicycle = 1, vehicle = 2 };
enum class View { ego = 0, other = 1 };
enum class PolygonKind { lane = 0, crosswalk = 1 };
enum class SignalColor { red = 0, green = 1, yellow = 2 };

inline constexpr int kCategoryCount = 3;
inline constexpr int kFrameRateHz = 10;

inline double frame_seconds(int frame) {
  return static_cast<double>(frame) / kFrameRateHz;
}

inline const char* to_string(Category c) {
  switch (c) {
    case Category::pedestrian: return "pedestrian";
    case Category::bicycle: return "bicycle";
    case Category::vehicle: return "vehicle";
  }
  return "?";
}
inline const char* to_string(View v) { return v == View::ego ? "ego" : "other"; }
inline const char* to_string(PolygonKind k) {
  return k == PolygonKind::lane ? "lane" : "crosswalk";
}
inline const char* to_string(SignalColor c) {
  switch (c) {
    case SignalColor::red: return "red";
    case SignalColor::green: return "green";
    case SignalColor::yellow: return "yellow";
  }
  return "?";
}

inline std::optional<Category> category_from(const std::string& s) {
  if (s == "pedestrian") return Category::pedestrian;
  if (s == "bicycle") return Category::bicycle;
  if (s == "vehicle") return Category::vehicle;
  return std::nullopt;
}
inline std::optional<View> view_from(const std::string& s) {
  if (s == "ego") return View::ego;
  if (s == "other") return View::other;
  return std::nullopt;
}
inline std::optional<PolygonKind> polygon_kind_from(const std::string& s) {
  if (s == "lane") return PolygonKind::lane;
  if (s == "crosswalk") return PolygonKind::crosswalk;
  return std::nullopt;
}
inline std::optional<SignalColor> color_from(const std::string& s) {
  if (s == "red") return SignalColor::red;
  if (s == "green") return SignalColor::green;
  if (s == "yellow") return SignalColor::yellow;
  return std::nullopt;
}

struct Box {
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  friend bool operator==(const Box&, const Box&) = default;
};

struct AgentState {
  Vec2 position;
  double yaw = 0.0;
  Vec2 velocity;
  Box box;
  Category category = Category::vehicle;
  int frame = 0;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Track {
  std::string id;
  View view = View::ego;
  std::map<int, AgentState> states;

  bool present(int frame) const { return states.count(frame) != 0; }
  const AgentState* at(int frame) const {
    auto it = states.find(frame);
    return it == states.end() ? nullptr : &it->second;
  }
  int first_frame() const { return states.begin()->first; }
  int last_frame() const { return states.rbegin()->first; }
  friend bool operator==(const Track&, const Track&) = default;
};

using TrackSet = std::map<std::string, Track>;

struct Pose {
  Vec2 position;
  double heading = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct MapPolygon {
  std::string id;
  PolygonKind kind = PolygonKind::lane;
  std::vector<Vec2> points;  // centerline samples
  Pose entry;
  std::string semantics = "vehicle";
  std::optional<std::string> controlling_signal;
  std::vector<Vec2> outline;  // optional closed boundary, empty if unknown
  friend bool operator==(const MapPolygon&, const MapPolygon&) = default;
};

struct SignalRecord {
  SignalColor color = SignalColor::red;
  double remaining = 0.0;  // seconds
  friend bool operator==(const SignalRecord&, const SignalRecord&) = default;
};

struct SignalSchedule {
  std::string id;
  std::vector<std::string> lane_ids;
  std::map<int, SignalRecord> records;
  double cycle_seconds = 1.0;
  friend bool operator==(const SignalSchedule&, const SignalSchedule&) = default;
};

struct Scene {
  std::string scenario_id;
  std::string profile = "v2x-traj-like";
  int frame_rate_hz = kFrameRateHz;
  int history_frames = 40;
  int future_frames = 40;
  TrackSet ego_tracks;
  TrackSet other_tracks;
  std::vector<MapPolygon> map;
  std::vector<SignalSchedule> signals;
  std::vector<std::string> target_ids;

  int total_frames() const { return history_frames + future_frames; }
  TrackSet& tracks(View v) { return v == View::ego ? ego_tracks : other_tracks; }
  const TrackSet& tracks(View v) const {
    return v == View::ego ? ego_tracks : other_tracks;
  }
  const SignalSchedule* signal(const std::string& id) const {
    for (const auto& s : signals)
      if (s.id == id) return &s;
    return nullptr;
  }
  std::size_t agent_count() const { return ego_tracks.size() + other_tracks.size(); }
  friend bool operator==(const Scene&, const Scene&) = default;
};

// Frame counts of the two supported dataset profiles.
struct ProfileFrames {
  int history;
  int future;
};

inline std::optional<ProfileFrames> profile_frames(const std::string& profile) {
  if (profile == "v2x-seq-like") return ProfileFrames{50, 50};
  if (profile == "v2x-traj-like") return ProfileFrames{40, 40};
  return std::nullopt;
}

struct Violation {
  std::string entity;
  std::string rule;
  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::vector<Violation> validate_scene(const Scene& s) {
  std::vector<Violation> out;
  auto report = [&](std::string entity, std::string rule) {
    out.push_back({std::move(entity), std::move(rule)});
  };
  if (s.frame_rate_hz != kFrameRateHz)
    report("scene " + s.scenario_id, "frame rate must be 10 Hz");
  if (s.history_frames <= 0 || s.future_frames < 0)
    report("scene " + s.scenario_id, "non-positive frame counts");
  for (View v : {View::ego, View::other}) {
    for (const auto& [key, t] : s.tracks(v)) {
      const std::string name = std::string(to_string(v)) + " track " + key;
      if (t.id != key) report(name, "track id does not match its key");
      if (t.view != v) report(name, "track stored under the wrong view");
      if (t.states.empty()) report(name, "track has no states");
      for (const auto& [f, st] : t.states) {
        const std::string at = name + " frame " + std::to_string(f);
        if (st.frame != f) report(at, "state frame does not match its key");
        if (f < 0 || f >= s.total_frames()) report(at, "frame outside scenario");
        if (!angle_in_range(st.yaw)) report(at, "yaw out of range");
        if (!(st.box.length > 0 && st.box.width > 0 && st.box.height > 0))
          report(at, "non-positive box");
        if (!std::isfinite(st.position.x) || !std::isfinite(st.position.y) ||
            !std::isfinite(st.velocity.x) || !std::isfinite(st.velocity.y))
          report(at, "non-finite state");
      }
    }
  }
  std::set<std::string> polygon_ids;
  for (const auto& p : s.map) {
    const std::string name = "polygon " + p.id;
    if (!polygon_ids.insert(p.id).second) report(name, "duplicate polygon id");
    if (p.points.size() < 2) report(name, "fewer than 2 sample points");
    if (!angle_in_range(p.entry.heading)) report(name, "entry heading out of range");
    if (p.controlling_signal && !s.signal(*p.controlling_signal))
      report(name, "controlling signal does not exist");
    if (!p.outline.empty() && p.outline.size() < 3)
      report(name, "outline has fewer than 3 vertices");
  }
  std::set<std::string> signal_ids;
  for (const auto& sg : s.signals) {
    const std::string name = "signal " + sg.id;
    if (!signal_ids.insert(sg.id).second) report(name, "duplicate signal id");
    if (!(sg.cycle_seconds > 0)) report(name, "non-positive cycle");
    for (const auto& lane : sg.lane_ids)
      if (!polygon_ids.count(lane)) report(name, "controls unknown lane " + lane);
    for (const auto& [f, r] : sg.records) {
      if (!(r.remaining >= 0)) report(name + " frame " + std::to_string(f), "negative remaining time");
      if (r.remaining > sg.cycle_seconds)
        report(name + " frame " + std::to_string(f), "remaining exceeds cycle");
    }
  }
  for (const auto& id : s.target_ids)
    if (!s.ego_tracks.count(id)) report("target " + id, "target missing from ego tracks");
  return out;
}

}  // namespace cotraj
