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

// Local spacetime frames and the relative-pose descriptor between two poses.
// Everything downstream consumes these descriptors instead of global
// coordinates, which is what makes encoded features frame-invariant.

#pragma once

#include <cmath>
#include <optional>

#include "cotraj/common.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

struct SpacetimePose {
  Vec2 position;
  double heading = 0.0;
  std::optional<int> time;  // empty for static map elements
};

struct RelDescriptor {
  double distance = 0.0;
  double bearing = 0.0;
  double rel_heading = 0.0;
  double dt = 0.0;  // frames
};

// Describes j as seen from i's frame. Bearing is 0 when the poses coincide;
// dt is 0 whenever either pose is timeless.
inline RelDescriptor rel_descriptor(const SpacetimePose& i, const SpacetimePose& j) {
  RelDescriptor r;
  const Vec2 d = j.position - i.position;
  r.distance = d.norm();
  if (r.distance > 0.0) {
    const Vec2 local = rotate(d, -i.heading);
    r.bearing = wrap_angle(std::atan2(local.y, local.x));
  }
  r.rel_heading = wrap_angle(j.heading - i.heading);
  if (i.time && j.time) r.dt = static_cast<double>(*j.time - *i.time);
  return r;
}

inline SpacetimePose pose_of(const AgentState& s) {
  return {s.position, s.yaw, s.frame};
}

inline SpacetimePose pose_of(const MapPolygon& p) {
  return {p.entry.position, p.entry.heading, std::nullopt};
}

// Expresses a global point in the frame anchored at `origin` with `heading`.
inline Vec2 to_local(Vec2 p, Vec2 origin, double heading) {
  return rotate(p - origin, -heading);
}

inline Vec2 to_global(Vec2 p, Vec2 origin, double heading) {
  return rotate(p, heading) + origin;
}

struct RigidMotion {
  double rotation = 0.0;
  Vec2 translation;

  Vec2 apply(Vec2 p) const { return rotate(p, rotation) + translation; }
  Vec2 apply_vector(Vec2 v) const { return rotate(v, rotation); }
  double apply_heading(double h) const { return wrap_angle(h + rotation); }
};

inline Scene transform_scene(const Scene& scene, const RigidMotion& m) {
  Scene out = scene;
  for (View v : {View::ego, View::other}) {
    for (auto& [id, t] : out.tracks(v)) {
      for (auto& [f, s] : t.states) {
        s.position = m.apply(s.position);
        s.velocity = m.apply_vector(s.velocity);
        s.yaw = m.apply_heading(s.yaw);
      }
    }
  }
  for (auto& p : out.map) {
    for (auto& q : p.points) q = m.apply(q);
    for (auto& q : p.outline) q = m.apply(q);
    p.entry.position = m.apply(p.entry.position);
    p.entry.heading = m.apply_heading(p.entry.heading);
  }
  return out;
}

}  // namespace cotraj
