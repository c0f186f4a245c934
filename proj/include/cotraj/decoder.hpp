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

// Two-stage decoder. Mode queries gather the target's history, nearby map
// polygons and each other, then emit future chunks recurrently as the
// proposal; a second query set conditioned on the proposal adds
// offsets and scores the modes.
//
// All locations are in the target's local frame at its reference pose.
// Row layout of every per-mode tensor: target-major, mode-minor.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cotraj/fusion.hpp"

namespace cotraj {

struct TargetInputs {
  std::string id;
  int frame = 0;     // reference frame
  Pose pose;         // reference pose (global)
  std::size_t ref_row = 0;
  EdgeList history;  // fused row -> target
  EdgeList map;      // polygon -> target
  std::vector<double> future;  // [horizon x 2] local, zero where missing
  std::vector<double> mask;    // [horizon]
};

struct DecoderInputs {
  int horizon = 0;
  std::vector<TargetInputs> targets;
};

// Targets that have at least one fused row; the reference row is the latest.
inline DecoderInputs prepare_decoder(const Scene& scene, const FusionInputs& f,
                                     const MapInputs& m, const std::vector<std::string>& targets,
                                     int horizon, double r_map) {
  DecoderInputs d;
  d.horizon = horizon;
  for (const auto& id : targets) {
    auto it = f.track_rows.find(id);
    if (it == f.track_rows.end() || it->second.empty()) continue;
    TargetInputs t;
    t.id = id;
    t.ref_row = it->second.back();
    const auto& ref = f.rows[t.ref_row];
    t.frame = ref.frame;
    t.pose = {ref.state.position, ref.state.yaw};
    const SpacetimePose here = pose_of(ref.state);
    for (auto r : it->second) t.history.add(r, 0, rel_descriptor(here, pose_of(f.rows[r].state)));
    for (auto j : polygons_near(ref.state.position, m, r_map))
      t.map.add(j, 0, rel_descriptor(here, m.entries[j]));
    t.future.assign(static_cast<std::size_t>(2 * horizon), 0.0);
    t.mask.assign(static_cast<std::size_t>(horizon), 0.0);
    if (auto tr = scene.ego_tracks.find(id); tr != scene.ego_tracks.end()) {
      for (int k = 0; k < horizon; ++k) {
        const AgentState* s = tr->second.at(scene.history_frames + k);
        if (!s) continue;
        const Vec2 local = to_local(s->position, t.pose.position, t.pose.heading);
        t.future[2 * k] = local.x;
        t.future[2 * k + 1] = local.y;
        t.mask[k] = 1.0;
      }
    }
    d.targets.push_back(std::move(t));
  }
  return d;
}

struct DecoderWeights {
  std::size_t K = 0, horizon = 0, chunks = 0, chunk_len = 0;
  double min_scale = 1e-2;
  nn::ParamId mode_queries = 0, refine_queries = 0;
  nn::FourierEmbed rel_am, rel_mm;
  nn::RelAttentionBlock am, mm, tm, am2, mm2, tm2;
  nn::Mlp loc_head, scale_head, update, anchor_embed;
  nn::Linear offset_head, refine_scale, prob_head;

  static DecoderWeights make(nn::ParameterStore& s, const EncoderConfig& e,
                             const DecoderConfig& c, Rng& rng) {
    const auto d = static_cast<std::size_t>(e.d_model);
    const auto h = static_cast<std::size_t>(e.heads);
    const auto hid = static_cast<std::size_t>(e.hidden);
    const auto nf = static_cast<std::size_t>(e.n_freq);
    DecoderWeights w;
    w.K = static_cast<std::size_t>(c.K);
    w.horizon = static_cast<std::size_t>(c.horizon);
    w.chunks = std::min(static_cast<std::size_t>(c.R), w.horizon);
    w.chunk_len = (w.horizon + w.chunks - 1) / w.chunks;
    w.min_scale = c.min_scale;
    w.mode_queries = s.add_normal("dec.mode_queries", {w.K, d}, rng, std::sqrt(double(w.K)));
    w.refine_queries = s.add_normal("dec.refine_queries", {w.K, d}, rng, std::sqrt(double(w.K)));
    w.rel_am = nn::FourierEmbed::make(s, "dec.rel_am", kRelFeatureDim, nf, d, rng);
    w.rel_mm = nn::FourierEmbed::make(s, "dec.rel_mm", kRelFeatureDim, nf, d, rng);
    w.am = nn::RelAttentionBlock::make(s, "dec.am", d, h, hid, rng);
    w.mm = nn::RelAttentionBlock::make(s, "dec.mm", d, h, hid, rng);
    w.tm = nn::RelAttentionBlock::make(s, "dec.tm", d, h, hid, rng, false);
    w.am2 = nn::RelAttentionBlock::make(s, "dec.am2", d, h, hid, rng);
    w.mm2 = nn::RelAttentionBlock::make(s, "dec.mm2", d, h, hid, rng);
    w.tm2 = nn::RelAttentionBlock::make(s, "dec.tm2", d, h, hid, rng, false);
    w.loc_head = nn::Mlp::make(s, "dec.loc", d, hid, 2 * w.chunk_len, rng);
    w.scale_head = nn::Mlp::make(s, "dec.scale", d, hid, 2 * w.chunk_len, rng, 0.1);
    w.update = nn::Mlp::make(s, "dec.update", 2, hid, d, rng, 0.5);
    w.anchor_embed = nn::Mlp::make(s, "dec.anchor", 2 * w.horizon, hid, d, rng);
    w.offset_head = nn::Linear::make_zero(s, "dec.offset", d, 2 * w.horizon);
    w.refine_scale = nn::Linear::make(s, "dec.refine_scale", d, 2 * w.horizon, rng, 0.1);
    w.prob_head = nn::Linear::make(s, "dec.prob", d, 1, rng, 0.01);
    return w;
  }

  std::size_t chunk_size(std::size_t r) const {
    return std::min(chunk_len, horizon - std::min(horizon, r * chunk_len));
  }
};

struct DecoderOutput {
  std::size_t targets = 0, K = 0, horizon = 0;
  nn::Tensor proposal_loc, proposal_scale;  // [targets*K x 2*horizon]
  nn::Tensor refined_loc, refined_scale;    // [targets*K x 2*horizon]
  nn::Tensor logits, probs;                 // [targets x K]
};

namespace decoder_detail {

// Edges of `per_target` (dst = target index) replicated onto every mode row.
struct ModeEdges {
  std::vector<std::size_t> src, dst, rel_index;
};

inline ModeEdges replicate(const std::vector<const EdgeList*>& per_target, std::size_t K) {
  ModeEdges m;
  std::size_t base = 0;
  for (std::size_t b = 0; b < per_target.size(); ++b) {
    const EdgeList& e = *per_target[b];
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < e.size(); ++i) {
        m.src.push_back(e.src[i]);
        m.dst.push_back(b * K + k);
        m.rel_index.push_back(base + i);
      }
    base += e.size();
  }
  return m;
}

inline nn::Tensor concat_rel(const std::vector<const EdgeList*>& per_target) {
  std::vector<double> rel;
  for (const auto* e : per_target) rel.insert(rel.end(), e->rel.begin(), e->rel.end());
  return nn::input_rows(kRelFeatureDim, std::move(rel));
}

}  // namespace decoder_detail

// One query stage: history, map, then mode-mode attention.
struct QueryStage {
  const nn::RelAttentionBlock* am;
  const nn::RelAttentionBlock* mm;
  const nn::RelAttentionBlock* tm;
};

inline DecoderOutput decode(nn::Binding& p, const DecoderWeights& w, const EncoderWeights& enc_w,
                            const nn::Tensor& grid, const DecoderInputs& in,
                            const MapInputs& map, MapFeatureCache& cache) {
  using namespace decoder_detail;
  const std::size_t B = in.targets.size(), K = w.K, F = w.horizon;
  if (static_cast<std::size_t>(in.horizon) != F)
    throw ConfigError("decoder horizon " + std::to_string(F) +
                      " does not match scenario future frames " + std::to_string(in.horizon));
  DecoderOutput out;
  out.targets = B;
  out.K = K;
  out.horizon = F;
  if (B == 0) return out;

  std::vector<const EdgeList*> hist, mapped;
  std::vector<std::size_t> ref_rows, mode_rows;
  for (const auto& t : in.targets) {
    hist.push_back(&t.history);
    mapped.push_back(&t.map);
    for (std::size_t k = 0; k < K; ++k) {
      ref_rows.push_back(t.ref_row);
      mode_rows.push_back(k);
    }
  }
  const ModeEdges he = replicate(hist, K);
  const ModeEdges me = replicate(mapped, K);
  ModeEdges te;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < K; ++j) {
        te.src.push_back(b * K + j);
        te.dst.push_back(b * K + k);
      }

  const nn::Tensor ref = nn::gather_rows(grid, ref_rows);
  nn::Tensor hist_rel, map_rel;
  if (!he.src.empty()) hist_rel = nn::gather_rows(w.rel_am(p, concat_rel(hist)), he.rel_index);
  PolygonSource polys;
  if (!me.src.empty()) {
    map_rel = nn::gather_rows(w.rel_mm(p, concat_rel(mapped)), me.rel_index);
    EdgeList flat;
    flat.src = me.src;
    flat.dst = me.dst;
    flat.rel.assign(me.src.size() * kRelFeatureDim, 0.0);
    polys = polygon_source(p, enc_w, map, flat, cache);
  }

  auto run = [&](nn::Tensor q, const QueryStage& st) {
    if (!he.src.empty()) q = (*st.am)(p, q, grid, he.src, he.dst, &hist_rel);
    if (!me.src.empty()) q = (*st.mm)(p, q, polys.x, polys.src, me.dst, &map_rel);
    return (*st.tm)(p, q, q, te.src, te.dst);
  };

  // Proposal.
  nn::Tensor h = nn::add(nn::gather_rows(p(w.mode_queries), mode_rows), ref);
  h = run(h, {&w.am, &w.mm, &w.tm});
  std::vector<nn::Tensor> incs, scales;
  nn::Tensor cum = nn::Tensor::zeros({B * K, 2});
  for (std::size_t r = 0; r < w.chunks; ++r) {
    const std::size_t len = w.chunk_size(r);
    if (len == 0) break;
    nn::Tensor inc = w.loc_head(p, h);
    nn::Tensor sc = w.scale_head(p, h);
    if (len < w.chunk_len) {
      inc = nn::slice_cols(inc, 0, 2 * len);
      sc = nn::slice_cols(sc, 0, 2 * len);
    }
    std::vector<double> e(2 * len * 2, 0.0);
    for (std::size_t s = 0; s < len; ++s) {
      e[(2 * s) * 2 + 0] = 1.0;
      e[(2 * s + 1) * 2 + 1] = 1.0;
    }
    cum = nn::add(cum, nn::matmul(inc, nn::Tensor::matrix(2 * len, 2, std::move(e))));
    incs.push_back(inc);
    scales.push_back(sc);
    if (r + 1 < w.chunks) h = nn::add(h, w.update(p, nn::scale(cum, 0.1)));
  }
  out.proposal_loc = nn::cumsum_steps(nn::concat_cols(incs), 2);
  out.proposal_scale = nn::add_scalar(nn::softplus(nn::concat_cols(scales)), w.min_scale);

  // Refinement around the proposal. The anchor stays on the tape so the
  // parameter gradient is the exact derivative of the summed loss.
  const nn::Tensor anchor = out.proposal_loc;
  nn::Tensor g = nn::add(nn::add(nn::gather_rows(p(w.refine_queries), mode_rows), ref),
                         w.anchor_embed(p, nn::scale(anchor, 0.1)));
  g = run(g, {&w.am2, &w.mm2, &w.tm2});
  out.refined_loc = nn::add(anchor, w.offset_head(p, g));
  out.refined_scale = nn::add_scalar(nn::softplus(w.refine_scale(p, g)), w.min_scale);
  out.logits = nn::reshape(w.prob_head(p, g), {B, K});
  out.probs = nn::softmax_rows(out.logits);
  return out;
}

// ---------------------------------------------------------------------------
// Loss

struct LossBreakdown {
  double propose = 0.0;
  double refine = 0.0;
  double cls = 0.0;
  double total = 0.0;
  double lambda = 1.0;
};

struct LossResult {
  nn::Tensor total;  // undefined when every target was skipped
  LossBreakdown parts;
  std::vector<int> winners;  // -1 for skipped targets
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Mean displacement of one mode row against the truth over valid frames.
inline double masked_ade(std::span<const double> loc, std::size_t row, std::size_t F,
                         const std::vector<double>& y, const std::vector<double>& mask) {
  double s = 0.0, n = 0.0;
  for (std::size_t t = 0; t < F; ++t) {
    if (mask[t] == 0.0) continue;
    s += std::hypot(loc[row * 2 * F + 2 * t] - y[2 * t], loc[row * 2 * F + 2 * t + 1] - y[2 * t + 1]);
    n += 1.0;
  }
  return s / n;
}

// Winner-takes-all loss. Per target, summed over valid steps and both
// coordinates; averaged over the targets that have any valid future frame.
inline LossResult decoder_loss(const DecoderOutput& out, const DecoderInputs& in,
                               const DecoderConfig& cfg) {
  const std::size_t B = out.targets, K = out.K, F = out.horizon;
  LossResult res;
  res.parts.lambda = cfg.lambda;
  res.winners.assign(B, -1);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& t = in.targets[b];
    double valid = 0.0;
    for (double m : t.mask) valid += m;
    if (valid == 0.0) {
      ++res.skipped;
      continue;
    }
    ++res.used;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double a = masked_ade(out.refined_loc.values(), b * K + k, F, t.future, t.mask);
      if (a < best) {
        best = a;
        res.winners[b] = static_cast<int>(k);
      }
    }
  }
  if (res.used == 0) return res;

  std::vector<std::size_t> rows;
  std::vector<double> y, w, cls_w(B * K, 0.0);
  const double inv = 1.0 / static_cast<double>(res.used);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& t = in.targets[b];
    const bool used = res.winners[b] >= 0;
    rows.push_back(b * K + static_cast<std::size_t>(std::max(0, res.winners[b])));
    y.insert(y.end(), t.future.begin(), t.future.end());
    for (std::size_t s = 0; s < F; ++s) {
      const double m = used ? t.mask[s] * inv : 0.0;
      w.push_back(m);
      w.push_back(m);
    }
    if (used) cls_w[b * K + static_cast<std::size_t>(res.winners[b])] = -inv;
  }
  const nn::Tensor target = nn::Tensor::matrix(B, 2 * F, y);
  auto regression = [&](const nn::Tensor& loc, const nn::Tensor& scale) {
    const nn::Tensor mu = nn::gather_rows(loc, rows);
    const nn::Tensor diff = nn::sub(target, mu);
    if (cfg.l2_loss) return nn::weighted_sum(nn::square(diff), w);
    const nn::Tensor logb = nn::log(nn::gather_rows(scale, rows));
    const nn::Tensor nll = nn::add_scalar(
        nn::add(logb, nn::mul(nn::abs(diff), nn::exp(nn::neg(logb)))), std::log(2.0));
    return nn::weighted_sum(nll, w);
  };
  const nn::Tensor propose = regression(out.proposal_loc, out.proposal_scale);
  const nn::Tensor refine = regression(out.refined_loc, out.refined_scale);
  const nn::Tensor cls = nn::weighted_sum(nn::log_softmax_rows(out.logits), cls_w);
  res.total = nn::add(nn::add(propose, refine), nn::scale(cls, cfg.lambda));
  res.parts.propose = propose.item();
  res.parts.refine = refine.item();
  res.parts.cls = cls.item();
  res.parts.total = res.parts.propose + res.parts.refine + cfg.lambda * res.parts.cls;
  return res;
}

}  // namespace cotraj
