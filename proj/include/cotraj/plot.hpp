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

// Static SVG figure of one scene: map, observed histories of both views,
// true futures and predicted modes (line opacity follows mode probability).

#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "cotraj/model.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

struct PlotOptions {
  double pixels_per_meter = 3.0;
  double margin = 10.0;  // meters
  bool show_other_view = true;
};

namespace plot_detail {

struct Frame {
  double min_x, max_x, min_y, max_y, scale;
  double x(double v) const { return (v - min_x) * scale; }
  double y(double v) const { return (max_y - v) * scale; }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string polyline(const Frame& f, const std::vector<Vec2>& pts, const std::string& style) {
  std::string s = "<polyline fill=\"none\" " + style + " points=\"";
  for (const auto& p : pts) s += num(f.x(p.x)) + "," + num(f.y(p.y)) + " ";
  return s + "\"/>\n";
}

}  // namespace plot_detail

inline std::string plot_scene_svg(const Scene& scene, const std::vector<TargetPrediction>& preds,
                                  const PlotOptions& opt = {}) {
  using namespace plot_detail;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  auto grow = [&](Vec2 p) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  };
  for (const auto& v : {View::ego, View::other})
    for (const auto& [id, t] : scene.tracks(v))
      for (const auto& [f, s] : t.states) grow(s.position);
  for (const auto& p : preds)
    for (const auto& m : p.modes)
      for (const auto& q : m) grow(q);
  if (lo_x > hi_x) {
    for (const auto& poly : scene.map)
      for (const auto& q : poly.points) grow(q);
  }
  if (lo_x > hi_x) lo_x = lo_y = -1.0, hi_x = hi_y = 1.0;
  const Frame f{lo_x - opt.margin, hi_x + opt.margin, lo_y - opt.margin, hi_y + opt.margin,
                opt.pixels_per_meter};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num((f.max_x - f.min_x) * f.scale)
    << "\" height=\"" << num((f.max_y - f.min_y) * f.scale) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& poly : scene.map) {
    const bool lane = poly.kind == PolygonKind::lane;
    o << polyline(f, poly.points,
                  lane ? "stroke=\"#c8c8c8\" stroke-width=\"1\""
                       : "stroke=\"#9bb7d4\" stroke-width=\"2\" stroke-dasharray=\"2,2\"");
  }
  const int H = scene.history_frames;
  auto history = [&](const Track& t) {
    std::vector<Vec2> pts;
    for (const auto& [fr, s] : t.states)
      if (fr < H) pts.push_back(s.position);
    return pts;
  };
  if (opt.show_other_view)
    for (const auto& [id, t] : scene.other_tracks)
      o << polyline(f, history(t), "stroke=\"#f0a050\" stroke-width=\"1.5\"");
  for (const auto& [id, t] : scene.ego_tracks) {
    o << polyline(f, history(t), "stroke=\"#2060c0\" stroke-width=\"2\"");
    std::vector<Vec2> fut;
    for (const auto& [fr, s] : t.states)
      if (fr >= H - 1) fut.push_back(s.position);
    if (fut.size() > 1)
      o << polyline(f, fut, "stroke=\"#30a030\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"");
  }
  for (const auto& p : preds) {
    for (std::size_t k = 0; k < p.modes.size(); ++k) {
      const double a = std::clamp(0.2 + 0.8 * p.probabilities[k], 0.2, 1.0);
      std::vector<Vec2> pts{p.reference_position};
      pts.insert(pts.end(), p.modes[k].begin(), p.modes[k].end());
      o << polyline(f, pts, "stroke=\"#d03030\" stroke-width=\"1.5\" stroke-opacity=\"" + num(a) + "\"");
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace cotraj
