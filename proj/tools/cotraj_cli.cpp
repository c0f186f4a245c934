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

// cotraj command-line tool. Every command that writes an output also writes
// <output>.manifest.json next to it.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotraj/assoc.hpp"
#include "cotraj/config.hpp"
#include "cotraj/manifest.hpp"
#include "cotraj/metrics.hpp"
#include "cotraj/model.hpp"
#include "cotraj/plot.hpp"
#include "cotraj/prediction_io.hpp"
#include "cotraj/reports.hpp"
#include "cotraj/scenario_io.hpp"
#include "cotraj/signal.hpp"
#include "cotraj/synth.hpp"
#include "cotraj/train.hpp"

namespace fs = std::filesystem;
using namespace cotraj;
using ojson = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on `jobs` threads. Results go to caller-owned
// slots indexed by i, so output order never depends on the job count. The
// first exception (lowest index) is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, jobs > 0 ? jobs : 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Scenario files named directly or found (sorted) inside directories.
std::vector<std::string> expand_paths(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& a : args) {
    if (fs::is_directory(a)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file() && e.path().extension() == ".jsonl" &&
            e.path().string().find(".manifest") == std::string::npos)
          found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(a)) {
      out.push_back(a);
    } else {
      throw DataError("no such file or directory: " + a);
    }
  }
  return out;
}

std::vector<Scene> load_scenes(const std::vector<std::string>& files, int jobs) {
  std::vector<Scene> scenes(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) { scenes[i] = load_scenario(files[i]); });
  return scenes;
}

PipelineConfig config_or_default(const std::string& path) {
  if (path.empty()) {
    PipelineConfig c;
    c.validate();
    return c;
  }
  return load_config(path);
}

void write_text(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

void manifest_for(const std::string& output, Manifest m) {
  write_manifest(m, output + ".manifest.json");
}

void load_weights(Model& m, const std::string& path) {
  if (!path.empty()) nn::checkpoint::load(path, m.store);
}

void print_parameter_count(const Model& m) {
  std::cerr << "model parameters: " << m.store.scalar_count() << " trainable scalars in "
            << m.store.size() << " tensors\n";
}

// ---------------------------------------------------------------------------

struct GenArgs {
  int agents = 20;
  std::string layout = "cross";
  std::string profile = "v2x-traj-like";
  std::string perturb;
  std::uint64_t seed = 0;
  int count = 1;
  double other_view_fraction = 1.0;
  std::string out;
  std::string truth_out;
};

int run_gen(const GenArgs& a) {
  if (a.count < 1) throw ConfigError("--count must be >= 1");
  GeneratorConfig g;
  g.agents = a.agents;
  g.layout = a.layout;
  g.profile = a.profile;
  g.other_view_fraction = a.other_view_fraction;
  std::optional<PerturbationSpec> spec;
  if (!a.perturb.empty()) spec = load_perturbation(a.perturb);
  const bool many = a.count > 1;
  if (many) fs::create_directories(a.out);
  std::vector<std::string> outputs;
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
    auto gen = generate_synthetic(g, seed);
    Scene truth = gen.scene;
    Scene scene = truth;
    if (many) {
      char name[32];
      std::snprintf(name, sizeof name, "scene_%05d", i);
      scene.scenario_id = truth.scenario_id = name;
    }
    if (spec) {
      PerturbationSpec s = *spec;
      s.seed = spec->seed + seed;
      scene = apply_perturbations(truth, s, &gen.truth).scene;
    }
    std::string path = a.out;
    if (many) path = (fs::path(a.out) / (scene.scenario_id + ".jsonl")).string();
    save_scenario(scene, path);
    outputs.push_back(path);
    if (!a.truth_out.empty()) {
      std::string tpath = a.truth_out;
      if (many) {
        fs::create_directories(a.truth_out);
        tpath = (fs::path(a.truth_out) / (truth.scenario_id + ".jsonl")).string();
      }
      save_scenario(truth, tpath);
      outputs.push_back(tpath);
    }
  }
  Manifest m{"gen", nullptr, a.seed, {}, outputs, {}};
  if (!a.perturb.empty()) m.inputs.push_back(a.perturb);
  m.extra["agents"] = a.agents;
  m.extra["layout"] = a.layout;
  m.extra["profile"] = a.profile;
  m.extra["count"] = a.count;
  manifest_for(many ? (fs::path(a.out) / "gen").string() : a.out, m);
  return 0;
}

int run_validate(const std::vector<std::string>& paths) {
  std::size_t bad = 0;
  for (const auto& file : expand_paths(paths)) {
    const Scene s = load_scenario(file);
    const auto v = validate_scene(s);
    for (const auto& x : v) std::cout << file << ": " << x.entity << ": " << x.rule << "\n";
    if (!v.empty()) ++bad;
  }
  if (bad) throw SchemaError(std::to_string(bad) + " scenario file(s) violate the schema");
  return 0;
}

int run_correct(const std::string& in, const std::string& config, const std::string& out,
                const std::string& report) {
  const auto cfg = config_or_default(config);
  const Scene s = load_scenario(in);
  const auto r = correct_scene(s, cfg.assoc);
  if (!out.empty()) save_scenario(apply_correction(s, r), out);
  const std::string rep = edits_to_jsonl(r.map.edits);
  if (!report.empty()) write_text(report, rep);
  else std::cout << rep;
  std::cerr << r.map.edits.size() << " edit(s), " << r.map.ego_to_other.size()
            << " identity pair(s), " << r.passes << " pass(es)"
            << (r.converged ? "" : ", not converged") << "\n";
  Manifest m{"correct", &cfg, 0, {in}, {}, {}};
  if (!config.empty()) m.inputs.push_back(config);
  if (!out.empty()) m.outputs.push_back(out);
  if (!report.empty()) m.outputs.push_back(report);
  m.extra["edits"] = r.map.edits.size();
  if (!out.empty() || !report.empty()) manifest_for(out.empty() ? report : out, m);
  return 0;
}

std::vector<PreparedSample> prepare_all(const std::vector<Scene>& scenes, const PipelineConfig& cfg,
                                        int jobs) {
  std::vector<PreparedSample> out(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) { out[i] = prepare_sample(scenes[i], cfg); });
  return out;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> data;
  std::string out;
  std::string curve;
  std::string init;
  int jobs = 1;
};

int run_train(const TrainArgs& a) {
  const auto cfg = config_or_default(a.config);
  const auto files = expand_paths(a.data);
  if (files.empty()) throw DataError("no training scenarios found");
  Model model(cfg);
  print_parameter_count(model);
  load_weights(model, a.init);
  const auto data = prepare_all(load_scenes(files, a.jobs), cfg, a.jobs);
  std::string curve = "epoch,lr,propose,refine,cls,total,seconds\n";
  const auto rep = train_model(model, data, [&](const EpochStats& e) {
    char line[256];
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n", e.epoch, e.lr,
                  e.mean.propose, e.mean.refine, e.mean.cls, e.mean.total, e.seconds);
    curve += line;
    std::cerr << "epoch " << e.epoch << " loss " << e.mean.total << "\n";
  });
  nn::checkpoint::save(model.store, a.out);
  const std::string curve_path = a.curve.empty() ? a.out + ".loss.csv" : a.curve;
  // Seconds vary between runs; the curve keeps them, the manifest does not.
  write_text(curve_path, curve);
  Manifest m{"train", &cfg, cfg.training.seed, files, {a.out, curve_path}, {}};
  if (!a.config.empty()) m.inputs.insert(m.inputs.begin(), a.config);
  m.extra["parameters"] = model.store.scalar_count();
  m.extra["steps"] = rep.steps;
  m.extra["final_loss"] = rep.epochs.empty() ? 0.0 : rep.epochs.back().mean.total;
  manifest_for(a.out, m);
  return 0;
}

int run_predict(const std::string& config, const std::string& weights,
                const std::vector<std::string>& scenes_in, const std::string& out, int jobs) {
  const auto cfg = config_or_default(config);
  Model model(cfg);
  print_parameter_count(model);
  load_weights(model, weights);
  const auto files = expand_paths(scenes_in);
  const auto scenes = load_scenes(files, jobs);
  std::vector<std::vector<TargetPrediction>> per(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto s = prepare_sample(scenes[i], cfg);
    MapFeatureCache cache(cfg.encoder.use_cache);
    per[i] = predict(model, s, cache);
  });
  std::vector<TargetPrediction> all;
  for (auto& p : per) all.insert(all.end(), p.begin(), p.end());
  save_predictions(all, out);
  Manifest m{"predict", &cfg, cfg.model_seed, files, {out}, {}};
  if (!weights.empty()) m.inputs.insert(m.inputs.begin(), weights);
  m.extra["predictions"] = all.size();
  manifest_for(out, m);
  return 0;
}

int run_eval(const std::string& pred, const std::vector<std::string>& truth_in,
             const std::string& buckets, const std::string& out, double match_distance) {
  std::vector<std::size_t> edges;
  if (buckets == "table5") edges = density_bucket_edges();
  else if (buckets == "none") edges = {0};
  else throw ConfigError("--buckets must be table5 or none");
  const auto preds = load_predictions(pred);
  std::map<std::string, Scene> truth;
  const auto files = expand_paths(truth_in);
  for (const auto& f : files) {
    Scene s = load_scenario(f);
    truth[s.scenario_id] = std::move(s);
  }
  std::vector<PredictionCase> cases;
  std::size_t unmatched = 0;
  for (const auto& p : preds) {
    auto it = truth.find(p.scenario_id);
    if (it == truth.end()) throw DataError("no truth scenario for " + p.scenario_id);
    auto c = match_distance > 0 ? case_by_position(p, it->second, match_distance)
                                : case_by_id(p, it->second);
    if (c) cases.push_back(std::move(*c));
    else ++unmatched;
  }
  if (cases.empty()) throw DataError("no prediction could be matched to a truth future");
  const auto rep = evaluate_cases(cases, edges);
  ojson j = report_to_json(rep);
  j["unmatched_predictions"] = unmatched;
  if (out.empty()) std::cout << j.dump(2) << "\n";
  else {
    write_json(out, j);
    Manifest m{"eval", nullptr, 0, {pred}, {out}, {}};
    m.inputs.insert(m.inputs.end(), files.begin(), files.end());
    manifest_for(out, m);
  }
  return 0;
}

int run_plot(const std::string& scene_path, const std::string& pred, const std::string& out) {
  const Scene s = load_scenario(scene_path);
  std::vector<TargetPrediction> preds;
  if (!pred.empty())
    for (auto& p : load_predictions(pred))
      if (p.scenario_id == s.scenario_id) preds.push_back(std::move(p));
  write_text(out, plot_scene_svg(s, preds));
  Manifest m{"plot", nullptr, 0, {scene_path}, {out}, {}};
  if (!pred.empty()) m.inputs.push_back(pred);
  manifest_for(out, m);
  return 0;
}

ojson signals_dump(const Scene& s) {
  ojson rows = ojson::array();
  for (View v : {View::ego, View::other}) {
    for (const auto& [id, frames] : signal_table(s, s.tracks(v))) {
      for (const auto& [f, a] : frames) {
        ojson r;
        r["view"] = to_string(v);
        r["track"] = id;
        r["frame"] = f;
        auto t = trend_to_json(a.trend);
        for (auto it = t.begin(); it != t.end(); ++it) r[it.key()] = it.value();
        r["ambiguous"] = a.region.ambiguous;
        rows.push_back(r);
      }
    }
  }
  return rows;
}

int run_encode(const std::string& scene_path, const std::string& config, const std::string& weights,
               const std::string& stats_out, const std::string& signals_out) {
  const auto cfg = config_or_default(config);
  const Scene s = load_scenario(scene_path);
  Model model(cfg);
  load_weights(model, weights);
  const auto in = prepare_encoder(s, cfg.encoder, cfg.ablation.use_signals);
  MapFeatureCache cache(cfg.encoder.use_cache);
  {
    nn::NoGradGuard guard;
    nn::Binding p(model.store, false);
    encode_agents(p, model.encoder, in, cache, cfg.ablation);
  }
  const auto st = cache.stats();
  ojson j;
  j["recomputes"] = st.recomputes;
  j["hits"] = st.hits;
  j["edges_signal"] = in.graph.same_signal;
  j["edges_radius"] = in.graph.radius;
  j["edges_full"] = in.graph.full;
  j["edges_saved_vs_full"] = in.graph.saved_fraction();
  j["tokens"] = in.slots.size();
  j["polygon_encodings"] = st.polygon_encodings;
  Manifest m{"encode", &cfg, cfg.model_seed, {scene_path}, {}, {}};
  if (!weights.empty()) m.inputs.push_back(weights);
  if (!stats_out.empty()) {
    write_json(stats_out, j);
    m.outputs.push_back(stats_out);
  } else {
    std::cout << j.dump(2) << "\n";
  }
  if (!signals_out.empty()) {
    std::string text;
    for (const auto& r : signals_dump(s)) text += r.dump() + "\n";
    write_text(signals_out, text);
    m.outputs.push_back(signals_out);
  }
  if (!m.outputs.empty()) manifest_for(m.outputs.front(), m);
  return 0;
}

int run_fuse(const std::string& config, const std::vector<std::string>& scenes_in,
             const std::string& report, int jobs) {
  const auto cfg = config_or_default(config);
  const auto files = expand_paths(scenes_in);
  const auto scenes = load_scenes(files, jobs);
  std::vector<ojson> rows(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const auto s = prepare_sample(scenes[i], cfg);
    ojson r;
    r["scenario"] = s.scenario_id;
    auto c = coverage_to_json(s.fusion);
    for (auto it = c.begin(); it != c.end(); ++it) r[it.key()] = it.value();
    rows[i] = r;
  });
  ojson j;
  j["scenarios"] = rows;
  if (report.empty()) std::cout << j.dump(2) << "\n";
  else {
    write_json(report, j);
    manifest_for(report, {"fuse", &cfg, 0, files, {report}, {}});
  }
  return 0;
}

int run_bench_cache(const std::string& config, int agents, std::uint64_t seed, const std::string& out) {
  PipelineConfig cfg = config_or_default(config);
  GeneratorConfig g;
  g.agents = agents;
  g.profile = "v2x-seq-like";
  const Scene s = generate_synthetic(g, seed).scene;
  Model model(cfg);
  print_parameter_count(model);
  const auto in = prepare_encoder(s, cfg.encoder, cfg.ablation.use_signals);
  auto timed = [&](bool enabled, CacheStats& st) {
    MapFeatureCache cache(enabled);
    nn::NoGradGuard guard;
    nn::Binding p(model.store, false);
    const auto t0 = std::chrono::steady_clock::now();
    encode_agents(p, model.encoder, in, cache, cfg.ablation);
    st = cache.stats();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };
  CacheStats on, off;
  const double ms_on = timed(true, on);
  const double ms_off = timed(false, off);
  ojson j;
  j["agents"] = s.agent_count();
  j["frames"] = s.history_frames;
  j["tokens"] = in.slots.size();
  j["cached"] = {{"recomputes", on.recomputes}, {"hits", on.hits},
                 {"polygon_encodings", on.polygon_encodings}, {"ms", ms_on}};
  j["uncached"] = {{"recomputes", off.recomputes}, {"hits", off.hits},
                   {"polygon_encodings", off.polygon_encodings}, {"ms", ms_off}};
  j["recompute_ratio"] = on.recomputes ? static_cast<double>(off.recomputes) / static_cast<double>(on.recomputes) : 0.0;
  j["edges_signal"] = in.graph.same_signal;
  j["edges_radius"] = in.graph.radius;
  j["edges_full"] = in.graph.full;
  j["edges_saved_vs_full"] = in.graph.saved_fraction();
  if (out.empty()) std::cout << j.dump(2) << "\n";
  else {
    write_json(out, j);
    manifest_for(out, {"bench-cache", &cfg, seed, {}, {out}, {}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cotraj: cooperative multi-view trajectory prediction toolkit"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs,-j", jobs, "Worker threads for per-scenario work")->check(CLI::PositiveNumber);

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Generate synthetic scenarios");
  gen->add_option("--agents", ga.agents, "Agents per scenario");
  gen->add_option("--layout", ga.layout, "Intersection layout")->check(CLI::IsMember({"cross", "tee"}));
  gen->add_option("--profile", ga.profile, "Frame profile")->check(CLI::IsMember({"v2x-traj-like", "v2x-seq-like"}));
  gen->add_option("--perturb", ga.perturb, "Perturbation spec (JSON)");
  gen->add_option("--seed", ga.seed, "Base seed; scenario i uses seed + i");
  gen->add_option("--count", ga.count, "Number of scenarios; > 1 makes --out a directory");
  gen->add_option("--other-view-fraction", ga.other_view_fraction, "Share of agents seen by the other view");
  gen->add_option("--out", ga.out, "Output file or directory")->required();
  gen->add_option("--truth-out", ga.truth_out, "Also write the unperturbed scenarios here");

  std::vector<std::string> validate_files;
  auto* val = app.add_subcommand("validate", "Check scenario files against the schema");
  val->add_option("files", validate_files, "Scenario files or directories")->required();

  std::string c_in, c_cfg, c_out, c_report;
  auto* cor = app.add_subcommand("correct", "Repair identity switches and report the edits");
  cor->add_option("--in", c_in, "Input scenario")->required();
  cor->add_option("--config", c_cfg, "Pipeline config (its assoc section is used)");
  cor->add_option("--out", c_out, "Corrected scenario");
  cor->add_option("--report", c_report, "Edit report, one JSON edit per line (stdout if absent)");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", ta.config, "Pipeline config");
  tr->add_option("--data", ta.data, "Training scenario files or directories")->required();
  tr->add_option("--out", ta.out, "Checkpoint path")->required();
  tr->add_option("--loss-curve", ta.curve, "Loss curve CSV (default <out>.loss.csv)");
  tr->add_option("--init", ta.init, "Start from this checkpoint");

  std::string p_cfg, p_w, p_out;
  std::vector<std::string> p_scenes;
  auto* pr = app.add_subcommand("predict", "Predict K futures per target");
  pr->add_option("--config", p_cfg, "Pipeline config");
  pr->add_option("--weights", p_w, "Checkpoint (untrained weights if absent)");
  pr->add_option("--scenes", p_scenes, "Scenario files or directories")->required();
  pr->add_option("--out", p_out, "Prediction file")->required();

  std::string e_pred, e_buckets = "table5", e_out;
  std::vector<std::string> e_truth;
  double e_match = 0.0;
  auto* ev = app.add_subcommand("eval", "Score predictions against truth scenarios");
  ev->add_option("--pred", e_pred, "Prediction file")->required();
  ev->add_option("--truth", e_truth, "Truth scenario files or directories")->required();
  ev->add_option("--buckets", e_buckets, "table5 (agent-count buckets) or none");
  ev->add_option("--out", e_out, "Report JSON (stdout if absent)");
  ev->add_option("--match-distance", e_match,
                 "Match targets to truth by reference position within this radius instead of by id");

  std::string b_cfg, b_out;
  int b_agents = 100;
  std::uint64_t b_seed = 1;
  auto* bc = app.add_subcommand("bench-cache", "Map-feature cache and edge-gating accounting");
  bc->add_option("--config", b_cfg, "Pipeline config");
  bc->add_option("--agents", b_agents, "Agents in the synthetic scene");
  bc->add_option("--seed", b_seed, "Generator seed");
  bc->add_option("--out", b_out, "Report JSON (stdout if absent)");

  std::string pl_scene, pl_pred, pl_out;
  auto* pl = app.add_subcommand("plot", "Render a scene and its predictions as SVG");
  pl->add_option("--scene", pl_scene, "Scenario file")->required();
  pl->add_option("--pred", pl_pred, "Prediction file");
  pl->add_option("--out", pl_out, "SVG path")->required();

  std::string en_scene, en_cfg, en_w, en_stats, en_sig;
  auto* en = app.add_subcommand("encode", "Run the scene encoder and dump statistics");
  en->add_option("--scene", en_scene, "Scenario file")->required();
  en->add_option("--config", en_cfg, "Pipeline config");
  en->add_option("--weights", en_w, "Checkpoint");
  en->add_option("--dump-cache-stats", en_stats, "Cache and edge statistics JSON");
  en->add_option("--dump-signals", en_sig, "Per-agent signal trend table (JSON lines)");

  std::string f_cfg, f_report;
  std::vector<std::string> f_scenes;
  auto* fu = app.add_subcommand("fuse", "Report cross-view fusion coverage");
  fu->add_option("--config", f_cfg, "Pipeline config");
  fu->add_option("--scenes", f_scenes, "Scenario files or directories")->required();
  fu->add_option("--report", f_report, "Coverage JSON (stdout if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen(ga);
    if (*val) return run_validate(validate_files);
    if (*cor) return run_correct(c_in, c_cfg, c_out, c_report);
    if (*tr) {
      ta.jobs = jobs;
      return run_train(ta);
    }
    if (*pr) return run_predict(p_cfg, p_w, p_scenes, p_out, jobs);
    if (*ev) return run_eval(e_pred, e_truth, e_buckets, e_out, e_match);
    if (*bc) return run_bench_cache(b_cfg, b_agents, b_seed, b_out);
    if (*pl) return run_plot(pl_scene, pl_pred, pl_out);
    if (*en) return run_encode(en_scene, en_cfg, en_w, en_stats, en_sig);
    if (*fu) return run_fuse(f_cfg, f_scenes, f_report, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
