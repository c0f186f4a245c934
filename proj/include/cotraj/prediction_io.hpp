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

// Prediction files: a header line, then one JSON object per target with K
// global-frame trajectories and their probabilities (see docs/format.md).

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cotraj/model.hpp"
#include "cotraj/scenario_io.hpp"

namespace cotraj {

inline constexpr const char* kPredictionSchema = "cotraj-predictions/1";

inline std::string write_predictions(const std::vector<TargetPrediction>& preds) {
  std::string out;
  ojson header;
  header["type"] = "header";
  header["schema"] = kPredictionSchema;
  out += header.dump() + "\n";
  for (const auto& p : preds) {
    ojson j;
    j["type"] = "prediction";
    j["scenario"] = p.scenario_id;
    j["track"] = p.track_id;
    j["reference_frame"] = p.reference_frame;
    j["reference"] = {p.reference_position.x, p.reference_position.y};
    j["first_frame"] = p.first_future_frame;
    j["probabilities"] = p.probabilities;
    auto& modes = j["modes"] = ojson::array();
    for (const auto& m : p.modes) {
      ojson pts = ojson::array();
      for (const auto& q : m) pts.push_back({q.x, q.y});
      modes.push_back(std::move(pts));
    }
    out += j.dump() + "\n";
  }
  return out;
}

inline std::vector<TargetPrediction> parse_predictions(std::istream& in) {
  using namespace io_detail;
  std::vector<TargetPrediction> out;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
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
      only_keys(rec, {"type", "schema"}, c);
      if (text(rec, "schema", c) != kPredictionSchema)
        throw SchemaError("unsupported prediction schema \"" + text(rec, "schema", c) + "\"");
      have_header = true;
      continue;
    }
    if (type != "prediction") c.fail("unknown record type \"" + type + "\"", "type");
    only_keys(rec, {"type", "scenario", "track", "reference_frame", "reference", "first_frame",
                    "probabilities", "modes"},
              c);
    TargetPrediction p;
    p.scenario_id = text(rec, "scenario", c);
    p.track_id = text(rec, "track", c);
    p.reference_frame = integer(rec, "reference_frame", c);
    p.first_future_frame = integer(rec, "first_frame", c);
    const auto& ref = field(rec, "reference", c);
    if (!ref.is_array() || ref.size() != 2 || !ref[0].is_number() || !ref[1].is_number())
      c.fail("reference must be [x, y]", "reference");
    p.reference_position = {ref[0].get<double>(), ref[1].get<double>()};
    const auto& probs = field(rec, "probabilities", c);
    if (!probs.is_array()) c.fail("probabilities must be an array", "probabilities");
    for (const auto& v : probs) {
      if (!v.is_number()) c.fail("probabilities must be numbers", "probabilities");
      p.probabilities.push_back(v.get<double>());
    }
    const auto& modes = field(rec, "modes", c);
    if (!modes.is_array() || modes.size() != p.probabilities.size())
      c.fail("modes must be an array with one entry per probability", "modes");
    for (const auto& m : modes) {
      if (!m.is_array()) c.fail("each mode must be an array of points", "modes");
      std::vector<Vec2> pts;
      for (const auto& q : m) {
        if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number())
          c.fail("points must be [x, y]", "modes");
        pts.push_back({q[0].get<double>(), q[1].get<double>()});
      }
      if (!p.modes.empty() && pts.size() != p.modes[0].size())
        c.fail("modes differ in length", "modes");
      p.modes.push_back(std::move(pts));
    }
    out.push_back(std::move(p));
  }
  if (!have_header) throw SchemaError("prediction file has no header");
  return out;
}

inline std::vector<TargetPrediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prediction file: " + path);
  return parse_predictions(in);
}

inline void save_predictions(const std::vector<TargetPrediction>& preds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write prediction file: " + path);
  out << write_predictions(preds);
}

}  // namespace cotraj
