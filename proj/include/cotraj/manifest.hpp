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

// Run manifests: what produced an output, without timestamps, so identical
// runs write identical manifests.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotraj/config.hpp"

namespace cotraj {

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a over bytes, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const PipelineConfig& c) { return fnv1a_hex(config_to_json(c).dump()); }

struct Manifest {
  std::string command;
  const PipelineConfig* config = nullptr;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json manifest_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  if (m.config) {
    j["config_hash"] = config_hash(*m.config);
    j["config"] = config_to_json(*m.config);
  }
  j["seed"] = m.seed;
  j["versions"] = {{"cotraj", kVersion},
                   {"compiler", __VERSION__},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  for (auto it = m.extra.begin(); it != m.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline void write_manifest(const Manifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << manifest_json(m).dump(2) << "\n";
}

}  // namespace cotraj
