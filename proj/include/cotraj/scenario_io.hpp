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

// Line-delimited scenario files (see docs/format.md).
//
// One JSON object per line: a header first, then map, signal, signal_state
// and agent records. The writer always emits the canonical order and field
// order, so save(load(f)) is byte-stable.

#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include <json.hpp>

#include "cotraj/common.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

inline constexpr const char* kScenarioSchema = "cotraj-scenario/1";

using ojson = nlohmann::ordered_json;

// Snaps a timestamp in seconds onto the 10 Hz grid.
inline int snap_frame(double seconds) {
  return static_cast<int>(std::lround(seconds * kFrameRateHz));
}

namespace io_detail {

struct LineContext {
  std::size_t line;
  const std::string& text;

  [[noreturn]] void fail(const std::string& what, const std::string& key = {}) const {
    std::size_t column = 1;
    if (!key.empty()) {
      const auto pos = text.find("\"" + key + "\"");
      if (pos != std::string::npos) column = pos + 1;
    }
    throw ParseError(line, column, what);
  }
};

inline const ojson& field(const ojson& rec, const char* key, const LineContext& c) {
  auto it = rec.find(key);
  if (it == rec.end()) c.fail(std::string("missing field \"") + key + "\"");
  return *it;
}

inline double number(const ojson& rec, const char* key, const LineContext& c) {
  const auto& v = field(rec, key, c);
  if (!v.is_number()) c.fail(std::string("field \"") + key + "\" must be a number", key);
  const double d = v.get<double>();
  if (!std::isfinite(d)) c.fail(std::string("field \"") + key + "\" is not finite", key);
  return d;
}

inline std::string text(const ojson& rec, const char* key, const LineContext& c) {
  const auto& v = field(rec, key, c);
  if (!v.is_string()) c.fail(std::string("field \"") + key + "\" must be a string", key);
  return v.get<std::string>();
}

inline int integer(const ojson& rec, const char* key, const LineContext& c) {
  const auto& v = field(rec, key, c);
  if (!v.is_number_integer())
    c.fail(std::string("field \"") + key + "\" must be an integer", key);
  return v.get<int>();
}

inline void only_keys(const ojson& rec, std::initializer_list<const char*> allowed,
                      const LineContext& c) {
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) c.fail("unknown field \"" + it.key() + "\"", it.key());
  }
}

inline std::vector<Vec2> points(const ojson& rec, const char* key, const LineContext& c) {
  const auto& v = field(rec, key, c);
  if (!v.is_array()) c.fail(std::string("field \"") + key + "\" must be an array", key);
  std::vector<Vec2> out;
  for (const auto& p : v) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      c.fail(std::string("field \"") + key + "\" must hold [x, y] pairs", key);
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

inline ojson points_json(const std::vector<Vec2>& pts) {
  ojson a = ojson::array();
  for (const auto& p : pts) a.push_back(ojson::array({p.x, p.y}));
  return a;
}

}  // namespace io_detail

inline Scene parse_scenario(std::istream& in) {
  using namespace io_detail;
  Scene scene;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::string, std::size_t> signal_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const LineContext c{line_no, line};
    ojson rec;
    try {
      rec = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.byte == 0 ? 1 : e.byte, "malformed JSON");
    }
    if (!rec.is_object()) c.fail("record must be a JSON object");
    const std::string type = text(rec, "type", c);
    if (!have_header) {
      if (type != "header") c.fail("first record must be the header", "type");
      only_keys(rec, {"type", "schema", "scenario_id", "profile", "frame_rate_hz",
                      "history_frames", "future_frames", "targets"}, c);
      const std::string schema = text(rec, "schema", c);
      if (schema != kScenarioSchema)
        throw SchemaError("line " + std::to_string(line_no) + ": schema \"" + schema +
                          "\" is not supported (expected " + kScenarioSchema + ")");
      scene.scenario_id = text(rec, "scenario_id", c);
      scene.profile = text(rec, "profile", c);
      if (!profile_frames(scene.profile)) c.fail("unknown profile \"" + scene.profile + "\"", "profile");
      scene.frame_rate_hz = integer(rec, "frame_rate_hz", c);
      if (scene.frame_rate_hz != kFrameRateHz) c.fail("frame_rate_hz must be 10", "frame_rate_hz");
      scene.history_frames = integer(rec, "history_frames", c);
      scene.future_frames = integer(rec, "future_frames", c);
      const auto& targets = field(rec, "targets", c);
      if (!targets.is_array()) c.fail("targets must be an array", "targets");
      for (const auto& t : targets) {
        if (!t.is_string()) c.fail("targets must be strings", "targets");
        scene.target_ids.push_back(t.get<std::string>());
      }
      have_header = true;
      continue;
    }
    if (type == "header") {
      c.fail("duplicate header", "type");
    } else if (type == "map") {
      only_keys(rec, {"type", "id", "kind", "semantics", "entry", "signal", "points", "outline"}, c);
      MapPolygon p;
      p.id = text(rec, "id", c);
      const auto kind = polygon_kind_from(text(rec, "kind", c));
      if (!kind) c.fail("unknown polygon kind", "kind");
      p.kind = *kind;
      p.semantics = text(rec, "semantics", c);
      const auto& entry = field(rec, "entry", c);
      if (!entry.is_object()) c.fail("entry must be an object", "entry");
      p.entry.position = {number(entry, "x", c), number(entry, "y", c)};
      p.entry.heading = number(entry, "heading", c);
      const auto& sig = field(rec, "signal", c);
      if (sig.is_string()) {
        p.controlling_signal = sig.get<std::string>();
      } else if (!sig.is_null()) {
        c.fail("signal must be a string or null", "signal");
      }
      p.points = points(rec, "points", c);
      if (rec.contains("outline")) p.outline = points(rec, "outline", c);
      scene.map.push_back(std::move(p));
    } else if (type == "signal") {
      only_keys(rec, {"type", "id", "cycle_seconds", "lanes"}, c);
      SignalSchedule s;
      s.id = text(rec, "id", c);
      s.cycle_seconds = number(rec, "cycle_seconds", c);
      const auto& lanes = field(rec, "lanes", c);
      if (!lanes.is_array()) c.fail("lanes must be an array", "lanes");
      for (const auto& l : lanes) {
        if (!l.is_string()) c.fail("lanes must be strings", "lanes");
        s.lane_ids.push_back(l.get<std::string>());
      }
      if (signal_index.count(s.id)) c.fail("duplicate signal \"" + s.id + "\"", "id");
      signal_index[s.id] = scene.signals.size();
      scene.signals.push_back(std::move(s));
    } else if (type == "signal_state") {
      only_keys(rec, {"type", "id", "t", "color", "remaining"}, c);
      const std::string id = text(rec, "id", c);
      auto it = signal_index.find(id);
      if (it == signal_index.end()) c.fail("signal_state for undeclared signal \"" + id + "\"", "id");
      const int frame = snap_frame(number(rec, "t", c));
      const auto color = color_from(text(rec, "color", c));
      if (!color) c.fail("unknown color", "color");
      auto& records = scene.signals[it->second].records;
      if (records.count(frame)) c.fail("duplicate signal_state frame", "t");
      records[frame] = {*color, number(rec, "remaining", c)};
    } else if (type == "agent") {
      only_keys(rec, {"type", "view", "track_id", "t", "x", "y", "yaw", "vx", "vy",
                      "length", "width", "height", "category"}, c);
      const auto view = view_from(text(rec, "view", c));
      if (!view) c.fail("view must be \"ego\" or \"other\"", "view");
      const std::string id = text(rec, "track_id", c);
      AgentState s;
      s.frame = snap_frame(number(rec, "t", c));
      s.position = {number(rec, "x", c), number(rec, "y", c)};
      s.yaw = number(rec, "yaw", c);
      s.velocity = {number(rec, "vx", c), number(rec, "vy", c)};
      s.box = {number(rec, "length", c), number(rec, "width", c), number(rec, "height", c)};
      const auto cat = category_from(text(rec, "category", c));
      if (!cat) c.fail("unknown category", "category");
      s.category = *cat;
      Track& t = scene.tracks(*view)[id];
      t.id = id;
      t.view = *view;
      if (!t.states.emplace(s.frame, s).second)
        c.fail("duplicate state for track \"" + id + "\" at frame " + std::to_string(s.frame), "t");
    } else {
      c.fail("unknown record type \"" + type + "\"", "type");
    }
  }
  if (!have_header) throw ParseError(line_no + 1, 1, "missing header record");
  const auto violations = validate_scene(scene);
  if (!violations.empty()) {
    std::string msg = "scene failed validation:";
    for (const auto& v : violations) msg += "\n  " + v.entity + ": " + v.rule;
    throw DataError(msg);
  }
  return scene;
}

inline Scene parse_scenario(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario(in);
}

inline Scene load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scenario file: " + path);
  return parse_scenario(in);
}

inline std::string write_scenario(const Scene& s) {
  using io_detail::points_json;
  std::string out;
  auto emit = [&](const ojson& j) {
    out += j.dump();
    out += '\n';
  };
  ojson h;
  h["type"] = "header";
  h["schema"] = kScenarioSchema;
  h["scenario_id"] = s.scenario_id;
  h["profile"] = s.profile;
  h["frame_rate_hz"] = s.frame_rate_hz;
  h["history_frames"] = s.history_frames;
  h["future_frames"] = s.future_frames;
  h["targets"] = s.target_ids;
  emit(h);
  for (const auto& p : s.map) {
    ojson j;
    j["type"] = "map";
    j["id"] = p.id;
    j["kind"] = to_string(p.kind);
    j["semantics"] = p.semantics;
    j["entry"] = {{"x", p.entry.position.x}, {"y", p.entry.position.y},
                  {"heading", p.entry.heading}};
    j["signal"] = p.controlling_signal ? ojson(*p.controlling_signal) : ojson(nullptr);
    j["points"] = points_json(p.points);
    if (!p.outline.empty()) j["outline"] = points_json(p.outline);
    emit(j);
  }
  for (const auto& sg : s.signals) {
    ojson j;
    j["type"] = "signal";
    j["id"] = sg.id;
    j["cycle_seconds"] = sg.cycle_seconds;
    j["lanes"] = sg.lane_ids;
    emit(j);
  }
  for (const auto& sg : s.signals) {
    for (const auto& [f, r] : sg.records) {
      ojson j;
      j["type"] = "signal_state";
      j["id"] = sg.id;
      j["t"] = frame_seconds(f);
      j["color"] = to_string(r.color);
      j["remaining"] = r.remaining;
      emit(j);
    }
  }
  for (View v : {View::ego, View::other}) {
    for (const auto& [id, t] : s.tracks(v)) {
      for (const auto& [f, st] : t.states) {
        ojson j;
        j["type"] = "agent";
        j["view"] = to_string(v);
        j["track_id"] = id;
        j["t"] = frame_seconds(f);
        j["x"] = st.position.x;
        j["y"] = st.position.y;
        j["yaw"] = st.yaw;
        j["vx"] = st.velocity.x;
        j["vy"] = st.velocity.y;
        j["length"] = st.box.length;
        j["width"] = st.box.width;
        j["height"] = st.box.height;
        j["category"] = to_string(st.category);
        emit(j);
      }
    }
  }
  return out;
}

inline void save_scenario(const Scene& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scenario file: " + path);
  out << write_scenario(s);
}

// Canonical text of an existing file: parse then re-emit.
inline std::string canonicalize(const std::string& text) {
  return write_scenario(parse_scenario(text));
}

}  // namespace cotraj
