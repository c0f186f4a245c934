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

// Cross-view identity association.
//
// 1. Per frame, boxes of both views are paired by a maximum-total-IoU
//    one-to-one assignment; pairs at or below tau_iou are dropped.
// 2. Frame pairs are aggregated per track; a candidate survives when it was
//    matched on at least tau_overlap of the frames both tracks are visible.
// 3. One-to-many relations are repaired. An anchor whose matches switch
//    between two candidates that are both alive on either side of the switch
//    carries two real agents and is split at the switch. Candidates that
//    follow each other in time with a small, motion-consistent gap are one
//    agent under several ids and are merged.
// 4. Steps 2-3 repeat until nothing changes, then mutually best candidates
//    form the final bijective identity map.
//
// Only history frames take part; edits relabel whole frame ranges, so future
// states travel with their history.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cotraj/hungarian.hpp"
#include "cotraj/polygon.hpp"
#include "cotraj/scene.hpp"

namespace cotraj {

struct AssocConfig {
  double tau_iou = 0.3;
  double tau_overlap = 0.3;
  int coexist_min_frames = 3;
  int merge_max_gap_frames = 10;
  double merge_max_gap_distance = 3.0;
  int max_passes = 10;

  void validate() const {
    if (!(tau_iou > 0 && tau_iou < 1)) throw ConfigError("tau_iou must lie in (0, 1)");
    if (!(tau_overlap > 0 && tau_overlap < 1))
      throw ConfigError("tau_overlap must lie in (0, 1)");
    if (coexist_min_frames < 1) throw ConfigError("coexist_min_frames must be >= 1");
    if (merge_max_gap_frames < 0) throw ConfigError("merge_max_gap_frames must be >= 0");
    if (!(merge_max_gap_distance >= 0))
      throw ConfigError("merge_max_gap_distance must be >= 0");
    if (max_passes < 1) throw ConfigError("max_passes must be >= 1");
  }
};

struct IndexPair {
  std::size_t ego;
  std::size_t other;
  double iou;
};

// Maximum-total-IoU one-to-one matching of two box lists.
inline std::vector<IndexPair> match_boxes(const std::vector<OrientedBox>& ego,
                                          const std::vector<OrientedBox>& other,
                                          double tau_iou) {
  const std::size_t n = ego.size(), m = other.size();
  std::vector<double> iou(n * m, 0.0), cost(n * m, 0.0);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double v = oriented_iou(ego[i], other[j]);
      iou[i * m + j] = v;
      if (v > tau_iou) {
        cost[i * m + j] = -v;
        any = true;
      }
    }
  std::vector<IndexPair> out;
  if (!any) return out;
  const auto assign = solve_assignment(cost, n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (assign[i] < 0) continue;
    const auto j = static_cast<std::size_t>(assign[i]);
    if (iou[i * m + j] > tau_iou) out.push_back({i, j, iou[i * m + j]});
  }
  return out;
}

struct FramePair {
  std::string ego_id;
  std::string other_id;
  double iou = 0.0;
};

struct FrameMatchResult {
  int frame = 0;
  std::vector<FramePair> pairs;
  std::vector<std::string> unmatched_ego;
  std::vector<std::string> unmatched_other;
};

using TrackStates = std::vector<std::pair<std::string, AgentState>>;

inline FrameMatchResult match_frame(int frame, const TrackStates& ego,
                                    const TrackStates& other, const AssocConfig& cfg) {
  FrameMatchResult r;
  r.frame = frame;
  std::vector<OrientedBox> a, b;
  for (const auto& [id, s] : ego) a.push_back(box_of(s));
  for (const auto& [id, s] : other) b.push_back(box_of(s));
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  for (const auto& p : match_boxes(a, b, cfg.tau_iou)) {
    r.pairs.push_back({ego[p.ego].first, other[p.other].first, p.iou});
    used_a[p.ego] = used_b[p.other] = true;
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!used_a[i]) r.unmatched_ego.push_back(ego[i].first);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (!used_b[j]) r.unmatched_other.push_back(other[j].first);
  return r;
}

inline TrackStates states_at(const TrackSet& ts, int frame) {
  TrackStates out;
  for (const auto& [id, t] : ts)
    if (const AgentState* s = t.at(frame)) out.emplace_back(id, *s);
  return out;
}

inline std::vector<FrameMatchResult> match_frames(const TrackSet& ego, const TrackSet& other,
                                                  int frame_end, const AssocConfig& cfg) {
  std::vector<FrameMatchResult> out;
  for (int f = 0; f < frame_end; ++f)
    out.push_back(match_frame(f, states_at(ego, f), states_at(other, f), cfg));
  return out;
}

struct Candidate {
  std::string id;
  int overlap_frames = 0;
  int total_frames = 0;  // frames where anchor and candidate are both visible
  double rate() const { return total_frames ? double(overlap_frames) / total_frames : 0.0; }
};

struct Relation {
  View anchor_view = View::ego;
  std::string anchor;
  std::vector<Candidate> candidates;  // sorted by id
};

// Relations from both sides: ego anchors first, then other anchors.
inline std::vector<Relation> aggregate_matches(const std::vector<FrameMatchResult>& frames,
                                               const TrackSet& ego, const TrackSet& other,
                                               const AssocConfig& cfg) {
  std::map<std::pair<std::string, std::string>, int> matched;
  for (const auto& fr : frames)
    for (const auto& p : fr.pairs) ++matched[{p.ego_id, p.other_id}];
  int frame_end = 0;
  for (const auto& fr : frames) frame_end = std::max(frame_end, fr.frame + 1);
  auto covisible = [&](const Track& a, const Track& b) {
    int n = 0;
    for (const auto& [f, s] : a.states) {
      if (f >= frame_end) break;
      if (b.present(f)) ++n;
    }
    return n;
  };
  std::map<std::string, std::vector<Candidate>> by_ego, by_other;
  for (const auto& [key, count] : matched) {
    const auto& [e, o] = key;
    Candidate c;
    c.overlap_frames = count;
    c.total_frames = covisible(ego.at(e), other.at(o));
    if (c.rate() < cfg.tau_overlap) continue;
    c.id = o;
    by_ego[e].push_back(c);
    c.id = e;
    by_other[o].push_back(c);
  }
  std::vector<Relation> out;
  for (auto& [id, cs] : by_ego) out.push_back({View::ego, id, std::move(cs)});
  for (auto& [id, cs] : by_other) out.push_back({View::other, id, std::move(cs)});
  return out;
}

struct AssocEdit {
  enum class Kind { split, merge } kind = Kind::split;
  View view = View::ego;
  std::vector<std::string> tracks;  // input ids
  std::vector<int> cut_frames;      // split only
  std::vector<std::string> new_ids;
};

struct IdentityMap {
  std::map<std::string, std::string> ego_to_other;
  std::map<std::string, std::string> other_to_ego;
  std::vector<AssocEdit> edits;
};

struct ConflictReport {
  View view;
  std::string track_id;
  std::string detail;
};

struct CorrectionResult {
  TrackSet ego;
  TrackSet other;
  IdentityMap map;
  std::vector<ConflictReport> conflicts;
  std::vector<std::string> target_ids;
  int passes = 0;
  bool converged = true;
};

namespace assoc_detail {

inline std::string fresh_id(const std::set<std::string>& taken, const std::string& base) {
  std::string id = base;
  for (int n = 2; taken.count(id); ++n) id = base + "_" + std::to_string(n);
  return id;
}

struct Span {
  int first = 0;
  int last = -1;
};

inline Span history_span(const Track& t, int frame_end) {
  Span s;
  bool any = false;
  for (const auto& [f, st] : t.states) {
    if (f >= frame_end) break;
    if (!any) s.first = f;
    s.last = f;
    any = true;
  }
  if (!any) s = {0, -1};
  return s;
}

inline int frames_in(const Track& t, int from, int to) {
  int n = 0;
  for (auto it = t.states.lower_bound(from); it != t.states.end() && it->first < to; ++it) ++n;
  return n;
}

// Cut frames where the anchor's matches switch between two candidates that
// both stay alive across the switch. Unmatched frames between the two runs go
// to whichever candidate overlaps the anchor more.
inline std::vector<int> split_cuts(const std::vector<std::pair<int, std::string>>& seq,
                                   const Track& anchor, const TrackSet& cands,
                                   int frame_end, int min_frames) {
  std::vector<int> cuts;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    const auto& [f1, c1] = seq[i - 1];
    const auto& [f2, c2] = seq[i];
    if (c1 == c2) continue;
    const Track& t1 = cands.at(c1);
    const Track& t2 = cands.at(c2);
    if (frames_in(t2, 0, f2) < min_frames || frames_in(t1, f2, frame_end) < min_frames)
      continue;
    int cut = f2;
    for (int g = f1 + 1; g < f2; ++g) {
      const AgentState* a = anchor.at(g);
      if (!a) continue;
      const AgentState* s1 = t1.at(g);
      const AgentState* s2 = t2.at(g);
      const double i1 = s1 ? oriented_iou(box_of(*a), box_of(*s1)) : 0.0;
      const double i2 = s2 ? oriented_iou(box_of(*a), box_of(*s2)) : 0.0;
      if (i2 > i1) {
        cut = g;
        break;
      }
    }
    cuts.push_back(cut);
  }
  return cuts;
}

// Candidates are merge-compatible when their spans are disjoint and each
// successor starts close to where its predecessor's constant-velocity motion
// would have taken it.
inline bool mergeable(const std::vector<std::string>& ids, const TrackSet& ts, int frame_end,
                      const AssocConfig& cfg) {
  std::vector<std::pair<Span, std::string>> spans;
  for (const auto& id : ids) {
    const Span s = history_span(ts.at(id), frame_end);
    if (s.last < s.first) return false;
    spans.emplace_back(s, id);
  }
  std::sort(spans.begin(), spans.end(),
            [](const auto& a, const auto& b) { return a.first.first < b.first.first; });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    const auto& [prev, pid] = spans[i - 1];
    const auto& [next, nid] = spans[i];
    if (next.first <= prev.last) return false;
    const int gap = next.first - prev.last;
    if (gap - 1 > cfg.merge_max_gap_frames) return false;
    const AgentState& a = ts.at(pid).states.at(prev.last);
    const AgentState& b = ts.at(nid).states.at(next.first);
    const Vec2 predicted = a.position + a.velocity * frame_seconds(gap);
    if ((predicted - b.position).norm() > cfg.merge_max_gap_distance) return false;
  }
  return true;
}

}  // namespace assoc_detail

// Mutually best candidate pairs (most matched frames, then id order).
inline IdentityMap mutual_best(const std::vector<Relation>& rel) {
  std::map<std::string, std::string> best_e, best_o;
  for (const auto& r : rel) {
    const Candidate* best = nullptr;
    for (const auto& c : r.candidates)
      if (!best || c.overlap_frames > best->overlap_frames ||
          (c.overlap_frames == best->overlap_frames && c.rate() > best->rate()))
        best = &c;
    if (!best) continue;
    (r.anchor_view == View::ego ? best_e : best_o)[r.anchor] = best->id;
  }
  IdentityMap m;
  for (const auto& [e, o] : best_e) {
    auto it = best_o.find(o);
    if (it != best_o.end() && it->second == e) {
      m.ego_to_other[e] = o;
      m.other_to_ego[o] = e;
    }
  }
  return m;
}

// Relations that are one-to-one from both sides.
inline IdentityMap strict_one_to_one(const std::vector<Relation>& rel) {
  std::map<std::string, std::string> only_e, only_o;
  for (const auto& r : rel) {
    if (r.candidates.size() != 1) continue;
    (r.anchor_view == View::ego ? only_e : only_o)[r.anchor] = r.candidates[0].id;
  }
  IdentityMap m;
  for (const auto& [e, o] : only_e) {
    auto it = only_o.find(o);
    if (it != only_o.end() && it->second == e) {
      m.ego_to_other[e] = o;
      m.other_to_ego[o] = e;
    }
  }
  return m;
}

// Repairs identity switches in the history frames [0, frame_end). Target ids
// are carried to whichever corrected ego track holds their last history state.
inline CorrectionResult correct_id_switches(const TrackSet& ego_in, const TrackSet& other_in,
                                            int frame_end, const AssocConfig& cfg,
                                            const std::vector<std::string>& targets = {}) {
  using namespace assoc_detail;
  cfg.validate();
  CorrectionResult res;
  res.ego = ego_in;
  res.other = other_in;

  // Frame matches are label-free: compute them once on the original ids and
  // translate through the current labels on every pass.
  const auto base = match_frames(ego_in, other_in, frame_end, cfg);
  std::map<std::pair<std::string, int>, std::string> label[2];
  for (const auto& [id, t] : ego_in)
    for (const auto& [f, s] : t.states) label[0][{id, f}] = id;
  for (const auto& [id, t] : other_in)
    for (const auto& [f, s] : t.states) label[1][{id, f}] = id;

  auto relabeled = [&]() {
    std::vector<FrameMatchResult> out = base;
    for (auto& fr : out)
      for (auto& p : fr.pairs) {
        p.ego_id = label[0].at({p.ego_id, fr.frame});
        p.other_id = label[1].at({p.other_id, fr.frame});
      }
    return out;
  };
  auto rebuild = [&](View v) {
    const TrackSet& src = v == View::ego ? ego_in : other_in;
    TrackSet out;
    for (const auto& [id, t] : src)
      for (const auto& [f, s] : t.states) {
        const std::string& cur = label[static_cast<int>(v)].at({id, f});
        Track& dst = out[cur];
        dst.id = cur;
        dst.view = v;
        dst.states[f] = s;
      }
    return out;
  };
  auto relabel_range = [&](View v, const std::string& from, int lo, int hi,
                           const std::string& to) {
    for (auto& [key, cur] : label[static_cast<int>(v)])
      if (cur == from && key.second >= lo && key.second < hi) cur = to;
  };

  std::vector<Relation> rel;
  for (res.passes = 1;; ++res.passes) {
    const auto frames = relabeled();
    rel = aggregate_matches(frames, res.ego, res.other, cfg);

    // Per-anchor match sequences.
    std::map<std::pair<int, std::string>, std::vector<std::pair<int, std::string>>> seq;
    for (const auto& fr : frames)
      for (const auto& p : fr.pairs) {
        seq[{0, p.ego_id}].emplace_back(fr.frame, p.other_id);
        seq[{1, p.other_id}].emplace_back(fr.frame, p.ego_id);
      }

    struct SplitPlan {
      View view;
      std::string id;
      std::vector<int> cuts;
    };
    struct MergePlan {
      View view;
      std::set<std::string> ids;
    };
    std::vector<SplitPlan> splits;
    std::vector<MergePlan> merges;
    for (const auto& r : rel) {
      if (r.candidates.size() < 2) continue;
      const int av = static_cast<int>(r.anchor_view);
      const View cv = r.anchor_view == View::ego ? View::other : View::ego;
      const TrackSet& cands = cv == View::ego ? res.ego : res.other;
      std::set<std::string> kept;
      for (const auto& c : r.candidates) kept.insert(c.id);
      std::vector<std::pair<int, std::string>> s;
      for (const auto& m : seq[{av, r.anchor}])
        if (kept.count(m.second)) s.push_back(m);
      const TrackSet& own = r.anchor_view == View::ego ? res.ego : res.other;
      auto cuts = split_cuts(s, own.at(r.anchor), cands, frame_end, cfg.coexist_min_frames);
      if (!cuts.empty()) {
        splits.push_back({r.anchor_view, r.anchor, std::move(cuts)});
        continue;
      }
      std::vector<std::string> ids(kept.begin(), kept.end());
      if (mergeable(ids, cands, frame_end, cfg)) merges.push_back({cv, kept});
    }
    // Union overlapping merge sets.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < merges.size() && !changed; ++i)
        for (std::size_t j = i + 1; j < merges.size() && !changed; ++j) {
          if (merges[i].view != merges[j].view) continue;
          bool overlap = false;
          for (const auto& id : merges[j].ids) overlap = overlap || merges[i].ids.count(id);
          if (!overlap) continue;
          merges[i].ids.insert(merges[j].ids.begin(), merges[j].ids.end());
          merges.erase(merges.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
        }
    }
    std::set<std::pair<int, std::string>> split_ids;
    for (const auto& sp : splits) split_ids.insert({static_cast<int>(sp.view), sp.id});

    bool edited = false;
    for (const auto& sp : splits) {
      TrackSet& ts = sp.view == View::ego ? res.ego : res.other;
      std::set<std::string> taken;
      for (const auto& [id, t] : ts) taken.insert(id);
      std::vector<int> cuts = sp.cuts;
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      AssocEdit e{AssocEdit::Kind::split, sp.view, {sp.id}, cuts, {}};
      std::vector<int> bounds{-(1 << 30)};
      bounds.insert(bounds.end(), cuts.begin(), cuts.end());
      bounds.push_back(1 << 30);
      for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
        const std::string nid = fresh_id(taken, sp.id + "/" + std::to_string(k + 1));
        taken.insert(nid);
        relabel_range(sp.view, sp.id, bounds[k], bounds[k + 1], nid);
        e.new_ids.push_back(nid);
      }
      res.map.edits.push_back(std::move(e));
      edited = true;
    }
    for (const auto& mp : merges) {
      bool clash = false;
      for (const auto& id : mp.ids)
        if (split_ids.count({static_cast<int>(mp.view), id})) {
          res.conflicts.push_back({mp.view, id, "track takes part in a split and a merge"});
          clash = true;
        }
      if (clash) continue;
      TrackSet& ts = mp.view == View::ego ? res.ego : res.other;
      std::set<std::string> taken;
      for (const auto& [id, t] : ts) taken.insert(id);
      std::string joined;
      for (const auto& id : mp.ids) joined += (joined.empty() ? "" : "+") + id;
      const std::string nid = fresh_id(taken, "m(" + joined + ")");
      for (const auto& id : mp.ids) relabel_range(mp.view, id, -(1 << 30), 1 << 30, nid);
      res.map.edits.push_back({AssocEdit::Kind::merge, mp.view,
                               std::vector<std::string>(mp.ids.begin(), mp.ids.end()), {}, {nid}});
      edited = true;
    }
    if (edited) {
      res.ego = rebuild(View::ego);
      res.other = rebuild(View::other);
    }
    if (!edited) break;
    if (res.passes >= cfg.max_passes) {
      res.converged = false;
      rel = aggregate_matches(relabeled(), res.ego, res.other, cfg);
      break;
    }
  }
  IdentityMap final_map = mutual_best(rel);
  res.map.ego_to_other = std::move(final_map.ego_to_other);
  res.map.other_to_ego = std::move(final_map.other_to_ego);

  for (const auto& t : targets) {
    auto it = ego_in.find(t);
    if (it == ego_in.end()) continue;
    auto& states = it->second.states;
    auto last = states.lower_bound(frame_end);
    if (last == states.begin()) continue;
    --last;
    const std::string& cur = label[0].at({t, last->first});
    if (std::find(res.target_ids.begin(), res.target_ids.end(), cur) == res.target_ids.end())
      res.target_ids.push_back(cur);
  }
  return res;
}

// Association without any repair: only relations that are one-to-one from
// both sides are kept.
inline IdentityMap associate_without_correction(const TrackSet& ego, const TrackSet& other,
                                                int frame_end, const AssocConfig& cfg) {
  cfg.validate();
  const auto frames = match_frames(ego, other, frame_end, cfg);
  return strict_one_to_one(aggregate_matches(frames, ego, other, cfg));
}

// Scene-level wrapper: corrected tracks, remapped targets.
inline Scene apply_correction(const Scene& s, const CorrectionResult& r) {
  Scene out = s;
  out.ego_tracks = r.ego;
  out.other_tracks = r.other;
  out.target_ids = r.target_ids;
  return out;
}

inline CorrectionResult correct_scene(const Scene& s, const AssocConfig& cfg) {
  return correct_id_switches(s.ego_tracks, s.other_tracks, s.history_frames, cfg,
                             s.target_ids);
}

}  // namespace cotraj
