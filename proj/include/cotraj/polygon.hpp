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

// Planar polygon helpers and oriented-box overlap.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "cotraj/common.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

struct OrientedBox {
  Vec2 center;
  double length = 1.0;
  double width = 1.0;
  double yaw = 0.0;
};

inline OrientedBox box_of(const AgentState& s) {
  return {s.position, s.box.length, s.box.width, s.yaw};
}

// Counter-clockwise corners.
inline std::array<Vec2, 4> corners(const OrientedBox& b) {
  const Vec2 ax = rotate({b.length / 2, 0.0}, b.yaw);
  const Vec2 ay = rotate({0.0, b.width / 2}, b.yaw);
  return {b.center + ax - ay,
          b.center + ax + ay, b.center - ax + ay, b.center - ax - ay};
}

inline double polygon_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t i = 0, n = p.size(); i < n; ++i) a += cross(p[i], p[(i + 1) % n]);
  return 0.5 * a;
}

// Sutherland-Hodgman clip of `subject` against a convex counter-clockwise
// `clip` polygon.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject,
                                     const std::vector<Vec2>& clip) {
  for (std::size_t i = 0, n = clip.size(); i < n && !subject.empty(); ++i) {
    const Vec2 a = clip[i], b = clip[(i + 1) % n];
    const Vec2 edge = b - a;
    auto side = [&](Vec2 p) { return cross(edge, p - a); };
    std::vector<Vec2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t j = 0, m = subject.size(); j < m; ++j) {
      const Vec2 p = subject[j], q = subject[(j + 1) % m];
      const double sp = side(p), sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline double oriented_iou(const OrientedBox& a, const OrientedBox& b) {
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  if ((a.center - b.center).norm() > reach) return 0.0;
  const auto ca = corners(a), cb = corners(b);
  const auto inter = clip_convex({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
  if (inter.size() < 3) return 0.0;
  const double i = std::max(0.0, polygon_area(inter));
  const double u = area_a + area_b - i;
  if (u <= 0.0) return 0.0;
  return std::clamp(i / u, 0.0, 1.0);
}

// Even-odd rule; points exactly on an edge may land on either side.
inline bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + ab * t)).norm();
}

inline double point_polyline_distance(Vec2 p, const std::vector<Vec2>& line) {
  if (line.size() == 1) return (p - line[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  return best;
}

}  // namespace cotraj
