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

// Pipeline configuration with strict JSON loading: unknown keys and type
// mismatches are reported together, never ignored.

#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cotraj/assoc.hpp"
#include "cotraj/common.hpp"
#include "cotraj/nn/params.hpp"

namespace cotraj {

struct EncoderConfig {
  int d_model = 64;
  int heads = 4;
  int hidden = 128;
  int n_freq = 8;
  int rounds = 2;
  double r_social = 50.0;
  double r_map = 30.0;
  double r_lane = 50.0;   // neighbourhood between map polygons
  int tau_history = 0;    // 0 = the whole encoded history
  int encode_frames = 0;  // trailing history frames encoded, 0 = all
  bool use_cache = true;
  bool signal_color = true;  // colour one-hot next to the trend scalar
};

struct FusionConfig {
  int window = 5;
  bool spectral = true;
  bool fill_in = true;
};

struct DecoderConfig {
  int horizon = 40;  // future frames, must match the scenario profile
  int K = 6;
  int R = 5;
  double lambda = 1.0;
  bool l2_loss = false;
  double min_scale = 1e-2;
};

struct TrainingConfig {
  int epochs = 64;
  double lr = 5e-4;
  double weight_decay = 0.0;
  int batch = 4;
  std::uint64_t seed = 7;
  int max_targets = 0;  // per scenario, 0 = all
};

struct AblationConfig {
  bool use_st_a = true;
  bool use_m_a = true;
  bool use_ss_a = true;
  bool use_signals = true;
  bool use_mvcm = true;
  bool use_fam = true;
};

struct PipelineConfig {
  AssocConfig assoc;
  EncoderConfig encoder;
  FusionConfig fusion;
  DecoderConfig decoder;
  TrainingConfig training;
  AblationConfig ablation;
  std::uint64_t model_seed = 1;

  void validate() const {
    assoc.validate();
    const auto& e = encoder;
    if (e.d_model < 1 || e.heads < 1 || e.d_model % e.heads != 0)
      throw ConfigError("encoder.heads must divide encoder.d_model");
    if (e.hidden < 1 || e.n_freq < 1 || e.rounds < 0)
      throw ConfigError("encoder.hidden, n_freq must be positive and rounds >= 0");
    if (!(e.r_social >= 0 && e.r_map >= 0 && e.r_lane >= 0))
      throw ConfigError("encoder radii must be non-negative");
    if (e.tau_history < 0 || e.encode_frames < 0)
      throw ConfigError("encoder.tau_history and encode_frames must be >= 0");
    if (fusion.window < 0) throw ConfigError("fusion.window must be >= 0");
    if (decoder.horizon < 1) throw ConfigError("decoder.horizon must be >= 1");
    if (decoder.K < 1) throw ConfigError("decoder.K must be >= 1");
    if (decoder.R < 1) throw ConfigError("decoder.R must be >= 1");
    if (!(decoder.lambda >= 0)) throw ConfigError("decoder.lambda must be >= 0");
    if (!(decoder.min_scale > 0)) throw ConfigError("decoder.min_scale must be > 0");
    if (training.epochs < 0 || training.batch < 1)
      throw ConfigError("training.epochs must be >= 0 and batch >= 1");
    if (!(training.lr > 0)) throw ConfigError("training.lr must be > 0");
    if (!(training.weight_decay >= 0)) throw ConfigError("training.weight_decay must be >= 0");
  }
};

namespace config_detail {

using ojson = nlohmann::ordered_json;

// Reads declared keys of one section and collects every problem.
class Section {
 public:
  Section(const ojson* j, std::string path, std::vector<std::string>& errors)
      : j_(j), path_(std::move(path)), errors_(errors) {
    if (j_ && !j_->is_object()) {
      errors_.push_back(path_ + ": must be an object");
      j_ = nullptr;
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_ || !j_->contains(key)) return;
    const auto& v = (*j_)[key];
    const std::string where = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return errors_.push_back(where + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return errors_.push_back(where + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
          v.get<long long>() < 0)
        return errors_.push_back(where + ": expected a non-negative integer");
      out = v.get<T>();
    } else {
      if (!v.is_number()) return errors_.push_back(where + ": expected a number");
      out = v.get<T>();
    }
  }

  const ojson* child(const char* key) {
    seen_.push_back(key);
    if (!j_ || !j_->contains(key)) return nullptr;
    return &(*j_)[key];
  }

  void finish() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      bool known = false;
      for (const auto& k : seen_) known = known || k == it.key();
      if (!known)
        errors_.push_back((path_.empty() ? "" : path_ + ".") + it.key() + ": unknown key");
    }
  }

 private:
  const ojson* j_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> seen_;
};

}  // namespace config_detail

inline PipelineConfig parse_config(const std::string& text) {
  using config_detail::ojson;
  using config_detail::Section;
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  std::vector<std::string> errors;
  Section top(&root, "", errors);
  top.get("model_seed", c.model_seed);
  {
    Section s(top.child("assoc"), "assoc", errors);
    s.get("tau_iou", c.assoc.tau_iou);
    s.get("tau_overlap", c.assoc.tau_overlap);
    s.get("coexist_min_frames", c.assoc.coexist_min_frames);
    s.get("merge_max_gap_frames", c.assoc.merge_max_gap_frames);
    s.get("merge_max_gap_distance", c.assoc.merge_max_gap_distance);
    s.get("max_passes", c.assoc.max_passes);
    s.finish();
  }
  {
    Section s(top.child("encoder"), "encoder", errors);
    s.get("d_model", c.encoder.d_model);
    s.get("heads", c.encoder.heads);
    s.get("hidden", c.encoder.hidden);
    s.get("n_freq", c.encoder.n_freq);
    s.get("rounds", c.encoder.rounds);
    s.get("r_social", c.encoder.r_social);
    s.get("r_map", c.encoder.r_map);
    s.get("r_lane", c.encoder.r_lane);
    s.get("tau_history", c.encoder.tau_history);
    s.get("encode_frames", c.encoder.encode_frames);
    s.get("use_cache", c.encoder.use_cache);
    s.get("signal_color", c.encoder.signal_color);
    s.finish();
  }
  {
    Section s(top.child("fusion"), "fusion", errors);
    s.get("window", c.fusion.window);
    s.get("spectral", c.fusion.spectral);
    s.get("fill_in", c.fusion.fill_in);
    s.finish();
  }
  {
    Section s(top.child("decoder"), "decoder", errors);
    s.get("horizon", c.decoder.horizon);
    s.get("K", c.decoder.K);
    s.get("R", c.decoder.R);
    s.get("lambda", c.decoder.lambda);
    s.get("l2_loss", c.decoder.l2_loss);
    s.get("min_scale", c.decoder.min_scale);
    s.finish();
  }
  {
    Section s(top.child("training"), "training", errors);
    s.get("epochs", c.training.epochs);
    s.get("lr", c.training.lr);
    s.get("weight_decay", c.training.weight_decay);
    s.get("batch", c.training.batch);
    s.get("seed", c.training.seed);
    s.get("max_targets", c.training.max_targets);
    s.finish();
  }
  {
    Section s(top.child("ablation"), "ablation", errors);
    s.get("use_st_a", c.ablation.use_st_a);
    s.get("use_m_a", c.ablation.use_m_a);
    s.get("use_ss_a", c.ablation.use_ss_a);
    s.get("use_signals", c.ablation.use_signals);
    s.get("use_mvcm", c.ablation.use_mvcm);
    s.get("use_fam", c.ablation.use_fam);
    s.finish();
  }
  top.finish();
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["model_seed"] = c.model_seed;
  j["assoc"] = {{"tau_iou", c.assoc.tau_iou},
                {"tau_overlap", c.assoc.tau_overlap},
                {"coexist_min_frames", c.assoc.coexist_min_frames},
                {"merge_max_gap_frames", c.assoc.merge_max_gap_frames},
                {"merge_max_gap_distance", c.assoc.merge_max_gap_distance},
                {"max_passes", c.assoc.max_passes}};
  j["encoder"] = {{"d_model", c.encoder.d_model},   {"heads", c.encoder.heads},
                  {"hidden", c.encoder.hidden},     {"n_freq", c.encoder.n_freq},
                  {"rounds", c.encoder.rounds},     {"r_social", c.encoder.r_social},
                  {"r_map", c.encoder.r_map},       {"r_lane", c.encoder.r_lane},
                  {"tau_history", c.encoder.tau_history},
                  {"encode_frames", c.encoder.encode_frames},
                  {"use_cache", c.encoder.use_cache},
                  {"signal_color", c.encoder.signal_color}};
  j["fusion"] = {{"window", c.fusion.window},
                 {"spectral", c.fusion.spectral},
                 {"fill_in", c.fusion.fill_in}};
  j["decoder"] = {{"horizon", c.decoder.horizon},
                  {"K", c.decoder.K},
                  {"R", c.decoder.R},
                  {"lambda", c.decoder.lambda},
                  {"l2_loss", c.decoder.l2_loss},
                  {"min_scale", c.decoder.min_scale}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"lr", c.training.lr},
                   {"weight_decay", c.training.weight_decay},
                   {"batch", c.training.batch},
                   {"seed", c.training.seed},
                   {"max_targets", c.training.max_targets}};
  j["ablation"] = {{"use_st_a", c.ablation.use_st_a},
                   {"use_m_a", c.ablation.use_m_a},
                   {"use_ss_a", c.ablation.use_ss_a},
                   {"use_signals", c.ablation.use_signals},
                   {"use_mvcm", c.ablation.use_mvcm},
                   {"use_fam", c.ablation.use_fam}};
  return j;
}

}  // namespace cotraj
