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

// The full predictor: identity correction, encoding, fusion and decoding of
// one scene, plus conversion of local-frame outputs to global predictions.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cotraj/assoc.hpp"
#include "cotraj/config.hpp"
#include "cotraj/decoder.hpp"
#include "cotraj/encoder.hpp"
#include "cotraj/fusion.hpp"

namespace cotraj {

struct Model {
  PipelineConfig config;
  nn::ParameterStore store;
  EncoderWeights encoder;
  FusionWeights fusion;
  DecoderWeights decoder;

  explicit Model(const PipelineConfig& cfg) : config(cfg) {
    cfg.validate();
    Rng rng(cfg.model_seed);
    encoder = EncoderWeights::make(store, cfg.encoder, rng);
    fusion = FusionWeights::make(store, cfg.encoder, rng);
    decoder = DecoderWeights::make(store, cfg.encoder, cfg.decoder, rng);
  }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

// Everything about one scene that does not depend on the weights.
struct PreparedSample {
  std::string scenario_id;
  Scene scene;  // after correction when enabled
  IdentityMap identities;
  EncoderInputs encoder;
  FusionInputs fusion;
  DecoderInputs decoder;
  std::size_t raw_agent_count = 0;
};

inline PreparedSample prepare_sample(const Scene& raw, const PipelineConfig& cfg,
                                     const std::vector<std::string>* targets = nullptr) {
  PreparedSample s;
  s.scenario_id = raw.scenario_id;
  s.raw_agent_count = raw.agent_count();
  if (raw.future_frames != cfg.decoder.horizon)
    throw ConfigError("scenario " + raw.scenario_id + " has " +
                      std::to_string(raw.future_frames) +
                      " future frames but decoder.horizon is " +
                      std::to_string(cfg.decoder.horizon));
  if (cfg.ablation.use_mvcm) {
    const auto r = correct_scene(raw, cfg.assoc);
    s.scene = apply_correction(raw, r);
    s.identities = r.map;
  } else {
    s.scene = raw;
    s.identities = associate_without_correction(raw.ego_tracks, raw.other_tracks,
                                                raw.history_frames, cfg.assoc);
  }
  s.encoder = prepare_encoder(s.scene, cfg.encoder, cfg.ablation.use_signals);
  s.fusion = prepare_fusion(s.scene, s.encoder, s.identities, cfg.fusion, cfg.ablation.use_fam,
                            cfg.encoder.r_social);
  std::vector<std::string> ids = targets ? *targets : s.scene.target_ids;
  if (cfg.training.max_targets > 0 && !targets &&
      ids.size() > static_cast<std::size_t>(cfg.training.max_targets))
    ids.resize(static_cast<std::size_t>(cfg.training.max_targets));
  s.decoder = prepare_decoder(s.scene, s.fusion, s.encoder.map, ids, cfg.decoder.horizon,
                              cfg.encoder.r_map);
  return s;
}

struct ForwardResult {
  nn::Tensor tokens;  // encoder output
  nn::Tensor fused;   // fusion output
  DecoderOutput out;
};

inline ForwardResult forward(const Model& m, nn::Binding& p, const PreparedSample& s,
                             MapFeatureCache& cache) {
  ForwardResult r;
  r.tokens = encode_agents(p, m.encoder, s.encoder, cache, m.config.ablation);
  r.fused = fuse(p, m.fusion, r.tokens, s.fusion);
  r.out = decode(p, m.decoder, m.encoder, r.fused, s.decoder, s.encoder.map, cache);
  return r;
}

struct TargetPrediction {
  std::string scenario_id;
  std::string track_id;
  int reference_frame = 0;
  Vec2 reference_position;
  int first_future_frame = 0;
  std::vector<std::vector<Vec2>> modes;  // [K][horizon], global frame
  std::vector<double> probabilities;
};

inline std::vector<TargetPrediction> to_predictions(const PreparedSample& s,
                                                    const DecoderOutput& out) {
  std::vector<TargetPrediction> preds;
  const auto loc = out.refined_loc.defined() ? out.refined_loc.values() : std::span<const double>();
  for (std::size_t b = 0; b < out.targets; ++b) {
    const auto& t = s.decoder.targets[b];
    TargetPrediction p;
    p.scenario_id = s.scenario_id;
    p.track_id = t.id;
    p.reference_frame = t.frame;
    p.reference_position = t.pose.position;
    p.first_future_frame = s.scene.history_frames;
    for (std::size_t k = 0; k < out.K; ++k) {
      std::vector<Vec2> pts;
      const std::size_t row = b * out.K + k;
      for (std::size_t i = 0; i < out.horizon; ++i) {
        const Vec2 local{loc[row * 2 * out.horizon + 2 * i], loc[row * 2 * out.horizon + 2 * i + 1]};
        pts.push_back(to_global(local, t.pose.position, t.pose.heading));
      }
      p.modes.push_back(std::move(pts));
      p.probabilities.push_back(out.probs.values()[row]);
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

// Inference without a tape.
inline std::vector<TargetPrediction> predict(const Model& m, const PreparedSample& s,
                                             MapFeatureCache& cache) {
  nn::NoGradGuard guard;
  nn::Binding p(m.store, false);
  const auto r = forward(m, p, s, cache);
  for (double v : r.out.refined_loc.defined() ? r.out.refined_loc.values() : std::span<const double>())
    if (!std::isfinite(v)) throw NumericError("non-finite prediction in " + s.scenario_id);
  return to_predictions(s, r.out);
}

}  // namespace cotraj
