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

// JSON forms of correction edits and perturbation settings used by the tools.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotraj/assoc.hpp"
#include "cotraj/synth.hpp"

namespace cotraj {

inline nlohmann::ordered_json edit_to_json(const AssocEdit& e) {
  nlohmann::ordered_json j;
  j["kind"] = e.kind == AssocEdit::Kind::split ? "split" : "merge";
  j["view"] = to_string(e.view);
  j["tracks"] = e.tracks;
  if (e.kind == AssocEdit::Kind::split) j["cut_frames"] = e.cut_frames;
  j["new_ids"] = e.new_ids;
  return j;
}

// One edit per line.
inline std::string edits_to_jsonl(const std::vector<AssocEdit>& edits) {
  std::string out;
  for (const auto& e : edits) out += edit_to_json(e).dump() + "\n";
  return out;
}

// Strict: unknown keys and wrong types are reported together.
inline PerturbationSpec perturbation_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("perturbation spec: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("perturbation spec must be a JSON object");
  PerturbationSpec s;
  std::vector<std::string> errors;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    auto num = [&](double& dst) {
      if (v.is_number()) dst = v.get<double>();
      else errors.push_back(k + ": expected a number");
    };
    auto flag = [&](bool& dst) {
      if (v.is_boolean()) dst = v.get<bool>();
      else errors.push_back(k + ": expected a boolean");
    };
    if (k == "position_noise_sigma") num(s.position_noise_sigma);
    else if (k == "id_split_rate") num(s.id_split_rate);
    else if (k == "id_merge_rate") num(s.id_merge_rate);
    else if (k == "occlusion_rate") num(s.occlusion_rate);
    else if (k == "perturb_ego") flag(s.perturb_ego);
    else if (k == "perturb_other") flag(s.perturb_other);
    else if (k == "seed") {
      if (v.is_number_unsigned()) s.seed = v.get<std::uint64_t>();
      else errors.push_back(k + ": expected a non-negative integer");
    } else errors.push_back("unknown key \"" + k + "\"");
  }
  if (!errors.empty()) {
    std::string msg = "perturbation spec has " + std::to_string(errors.size()) + " error(s):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  s.validate();
  return s;
}

inline PerturbationSpec load_perturbation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read perturbation spec: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return perturbation_from_json(ss.str());
}

}  // namespace cotraj
