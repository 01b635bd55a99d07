// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ctbg/error.hpp"
#include "ctbg/gradcheck.hpp"
#include "ctbg/io.hpp"
#include "ctbg/metrics.hpp"
#include "ctbg/numcore/checkpoint.hpp"
#include "ctbg/synthgen.hpp"
#include "ctbg/training.hpp"
#include "json.hpp"

namespace ctbg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train;
  DifficultyConfig data;
  std::string data_path;
  std::string out_path;
};

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("malformed run config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      if (!value.is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
      rc.seed = value.get<std::uint64_t>();
    } else if (key == "model") {
      rc.model = model_config_from_json(value.dump());
    } else if (key == "train") {
      rc.train = train_config_from_json(value.dump());
    } else if (key == "data") {
      rc.data = value.is_string() ? difficulty_preset(value.get<std::string>())
                                  : difficulty_config_from_json(value.dump());
    } else if (key == "paths") {
      if (!value.is_object()) throw ConfigError("paths must be an object");
      for (const auto& [pk, pv] : value.items()) {
        if (!pv.is_string()) throw ConfigError("paths." + pk + " must be a string");
        if (pk == "data") {
          rc.data_path = pv.get<std::string>();
        } else if (pk == "out") {
          rc.out_path = pv.get<std::string>();
        } else {
          throw ConfigError("unknown key \"" + pk + "\" in paths");
        }
      }
    } else {
      throw ConfigError("unknown key \"" + key + "\" in run config");
    }
  }
  return rc;
}

json run_config_json(const RunConfig& rc, const std::string& command) {
  json j;
  j["command"] = command;
  j["seed"] = rc.seed;
  j["model"] = json::parse(model_config_to_json(rc.model));
  j["train"] = json::parse(train_config_to_json(rc.train));
  j["data"] = json::parse(difficulty_config_to_json(rc.data));
  j["paths"] = {{"data", rc.data_path}, {"out", rc.out_path}};
  return j;
}

void write_echo(const fs::path& path, const json& echo) { write_text(path, echo.dump(2) + "\n"); }

fs::path echo_beside(const fs::path& out) {
  fs::path p = out;
  p += ".config.json";
  return p;
}

struct Toggles {
  bool no_dgsr = false;
  bool no_caf = false;
  bool no_rasa = false;

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-dgsr", no_dgsr, "Disable dynamic graph structure refinement");
    cmd->add_flag("--no-caf", no_caf, "Run self-attention before cross-attention");
    cmd->add_flag("--no-rasa", no_rasa, "Disable the relation-aware self-attention mask");
  }
  void apply(ModelConfig& mc) const {
    if (no_dgsr) mc.dgsr = false;
    if (no_caf) mc.caf = false;
    if (no_rasa) mc.rasa = false;
  }
};

// ---- gen-data ----

struct GenOptions {
  std::optional<std::uint64_t> seed;
  std::size_t count = 100;
  std::string difficulty = "easy";
  std::string config;
  std::string out;
};

int cmd_gen_data(const GenOptions& o) {
  RunConfig rc = load_run_config(o.config);
  if (o.config.empty() || o.difficulty != "easy") rc.data = difficulty_preset(o.difficulty);
  if (o.seed) rc.seed = *o.seed;
  rc.out_path = o.out;
  const auto scenes = generate_corpus(rc.seed, o.count, rc.data);
  write_scenes(o.out, scenes);
  auto echo = run_config_json(rc, "gen-data");
  echo["count"] = o.count;
  write_echo(echo_beside(o.out), echo);
  std::cout << json{{"scenes", scenes.size()}, {"out", o.out}}.dump() << "\n";
  return kOk;
}

// ---- train ----

struct TrainOptions {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> workers;
  bool quiet = false;
  Toggles toggles;
};

int cmd_train(const TrainOptions& o) {
  RunConfig rc = load_run_config(o.config);
  if (!o.data.empty()) rc.data_path = o.data;
  if (!o.out.empty()) rc.out_path = o.out;
  if (o.seed) rc.seed = *o.seed;
  if (o.iters) {
    rc.train.total_iters = *o.iters;
    rc.train.warmup_iters = std::min(rc.train.warmup_iters, *o.iters - 1);
  }
  if (o.workers) rc.train.workers = *o.workers;
  o.toggles.apply(rc.model);
  rc.model.validate();
  rc.train.validate();
  if (rc.data_path.empty()) throw ConfigError("train needs --data (or paths.data in the config)");
  if (rc.out_path.empty()) throw ConfigError("train needs --out (or paths.out in the config)");

  const auto corpus = read_scenes(rc.data_path);
  const fs::path out = rc.out_path;
  fs::create_directories(out);
  write_echo(out / "config.json", run_config_json(rc, "train"));

  Model<float> model(rc.model, rc.seed);
  TrainOutputs outputs;
  outputs.dir = out;
  if (!o.quiet) {
    outputs.on_iteration = [&](const LossLogRow& r) {
      if (r.iter % 100 == 0 || r.iter == rc.train.total_iters) {
        std::fprintf(stderr, "iter %zu lr %.3g loss %.5f rel %.5f edge %.5f\n", r.iter, r.lr, r.loss_total,
                     r.loss_rel_final, r.loss_edge_final);
      }
    };
  }
  const auto log = train(model, corpus, rc.train, rc.seed, outputs);
  std::cout << json{{"iterations", log.size()},
                    {"final_loss", log.back().loss_total},
                    {"checkpoint", (out / "checkpoint.json").string()}}
                   .dump()
            << "\n";
  return kOk;
}

// ---- infer ----

struct InferOptions {
  std::string ckpt;
  std::string data;
  std::string out;
  Toggles toggles;
};

int cmd_infer(const InferOptions& o) {
  const auto meta = json::parse(read_checkpoint_metadata(o.ckpt));
  if (!meta.contains("model")) throw ConfigError("checkpoint metadata lacks a model config");
  ModelConfig mc = model_config_from_json(meta["model"].dump());
  o.toggles.apply(mc);
  Model<float> model(mc, 0);
  load_checkpoint(o.ckpt, model.params());

  const auto scenes = read_scenes(o.data);
  std::vector<ScenePrediction> preds;
  preds.reserve(scenes.size());
  for (const auto& s : scenes) {
    Tape<float> tape;
    auto r = run_scene(model, tape, s);
    preds.push_back({s.units, std::move(r.edges), std::move(r.blocks)});
  }
  write_predictions(o.out, preds);
  RunConfig rc;
  rc.model = mc;
  rc.data_path = o.data;
  rc.out_path = o.out;
  auto echo = run_config_json(rc, "infer");
  echo["checkpoint"] = o.ckpt;
  write_echo(echo_beside(o.out), echo);
  std::cout << json{{"scenes", preds.size()}, {"out", o.out}}.dump() << "\n";
  return kOk;
}

// ---- eval ----

struct EvalOptions {
  std::string pred;
  std::string gt;
  std::string out;
};

int cmd_eval(const EvalOptions& o) {
  auto preds = read_predictions(o.pred);
  const auto gts = read_scenes(o.gt);
  if (preds.size() != gts.size()) {
    throw ConfigError("prediction file has " + std::to_string(preds.size()) + " scenes, ground truth has " +
                      std::to_string(gts.size()));
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].units.empty()) preds[i].units = gts[i].units;
  }
  const auto report = evaluate(preds, gts);
  const auto text = report_to_json(report);
  if (!o.out.empty()) {
    write_text(o.out, text + "\n");
    write_echo(echo_beside(o.out), json{{"command", "eval"}, {"pred", o.pred}, {"gt", o.gt}, {"out", o.out}});
  }
  std::cout << text << "\n";
  return kOk;
}

// ---- grad-check ----

int cmd_grad_check(std::uint64_t seed) {
  GradCheckConfig cfg;
  cfg.seed = seed;
  const auto r = grad_check(cfg);
  std::cout << json{{"checked", r.checked},
                    {"max_rel_error", r.max_rel_error},
                    {"tolerance", cfg.tolerance},
                    {"worst_param", r.worst_param},
                    {"worst_index", r.worst_index},
                    {"passed", r.passed}}
                   .dump()
            << "\n";
  return r.passed ? kOk : kFailure;
}

// ---- render ----

struct RenderOptions {
  std::string data;
  std::string pred;
  std::string out;
  std::size_t index = 0;
  double size = 800;
};

struct Point {
  double x, y;
};

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  if (pts.size() < 3) return pts;
  auto cross = [](Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::string render_svg(const std::vector<UnitBox>& units, const ScenePrediction& pred, double size) {
  std::ostringstream svg;
  svg.setf(std::ios::fixed);
  svg.precision(2);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n"
      << "  <defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"7\" refY=\"4\" "
         "orient=\"auto\"><path d=\"M0,0 L8,4 L0,8 z\" fill=\"#d62728\"/></marker></defs>\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double pad = 3;
  for (const auto& b : pred.blocks) {
    std::vector<Point> pts;
    for (auto u : b) {
      if (u >= units.size()) continue;
      const auto& r = units[u];
      pts.push_back({r.x0 * size - pad, r.y0 * size - pad});
      pts.push_back({r.x1 * size + pad, r.y0 * size - pad});
      pts.push_back({r.x1 * size + pad, r.y1 * size + pad});
      pts.push_back({r.x0 * size - pad, r.y1 * size + pad});
    }
    const auto hull = convex_hull(pts);
    if (hull.empty()) continue;
    svg << "  <polygon fill=\"#2ca02c\" fill-opacity=\"0.15\" stroke=\"#2ca02c\" stroke-width=\"2\" points=\"";
    for (const auto& p : hull) svg << p.x << "," << p.y << " ";
    svg << "\"/>\n";
  }
  for (const auto& r : units) {
    svg << "  <rect x=\"" << r.x0 * size << "\" y=\"" << r.y0 * size << "\" width=\"" << r.width() * size
        << "\" height=\"" << r.height() * size << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  for (const auto& e : pred.edges) {
    if (e.src >= units.size() || e.dst >= units.size()) continue;
    svg << "  <line x1=\"" << units[e.src].cx() * size << "\" y1=\"" << units[e.src].cy() * size << "\" x2=\""
        << units[e.dst].cx() * size << "\" y2=\"" << units[e.dst].cy() * size
        << "\" stroke=\"#d62728\" stroke-width=\"1.5\" marker-end=\"url(#arrow)\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

int cmd_render(const RenderOptions& o) {
  const auto scenes = read_scenes(o.data);
  if (o.index >= scenes.size()) throw ConfigError("--index beyond the scene count");
  const auto& scene = scenes[o.index];
  ScenePrediction pred;
  if (o.pred.empty()) {
    pred.blocks = scene.blocks;
    const auto succ = successor_labels(scene);
    for (std::size_t i = 0; i < succ.size(); ++i)
      if (succ[i] < succ.size()) pred.edges.push_back({i, succ[i], 1.0});
  } else {
    const auto preds = read_predictions(o.pred);
    if (o.index >= preds.size()) throw ConfigError("--index beyond the prediction count");
    pred = preds[o.index];
  }
  const auto& units = pred.units.empty() ? scene.units : pred.units;
  write_text(o.out, render_svg(units, pred, o.size));
  write_echo(echo_beside(o.out),
             json{{"command", "render"}, {"data", o.data}, {"pred", o.pred}, {"index", o.index}, {"out", o.out}});
  return kOk;
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Contextual text block detection with a dynamic relation transformer"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic scene corpus (JSON lines)");
  gen_cmd->add_option("--seed", gen.seed, "Seed of the first scene");
  gen_cmd->add_option("--count", gen.count, "Number of scenes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--difficulty", gen.difficulty, "easy or hard")->check(CLI::IsMember({"easy", "hard"}));
  gen_cmd->add_option("--config", gen.config, "Run config JSON")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output corpus path")->required();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a scene corpus");
  train_cmd->add_option("--data", tr.data, "Training corpus (JSON lines)");
  train_cmd->add_option("--config", tr.config, "Run config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Output directory");
  train_cmd->add_option("--seed", tr.seed, "Initialization and batching seed");
  train_cmd->add_option("--iters", tr.iters, "Override the iteration count")->check(CLI::Range(2, 100000000));
  train_cmd->add_option("--workers", tr.workers, "Threads per batch")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--quiet", tr.quiet, "No progress lines");
  tr.toggles.add_to(train_cmd);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", ev.pred, "Predictions (JSON lines)")->required();
  eval_cmd->add_option("--gt", ev.gt, "Ground-truth scenes (JSON lines)")->required();
  eval_cmd->add_option("--out", ev.out, "Report path");

  InferOptions inf;
  auto* infer_cmd = app.add_subcommand("infer", "Predict blocks with a trained checkpoint");
  infer_cmd->add_option("--ckpt", inf.ckpt, "Checkpoint manifest")->required();
  infer_cmd->add_option("--data", inf.data, "Scenes (JSON lines)")->required();
  infer_cmd->add_option("--out", inf.out, "Predictions path")->required();
  inf.toggles.add_to(infer_cmd);

  std::uint64_t gc_seed = GradCheckConfig{}.seed;
  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of every parameter gradient");
  gc_cmd->add_option("--seed", gc_seed, "Parameter draw seed");

  RenderOptions rd;
  auto* render_cmd = app.add_subcommand("render", "Draw one scene with its predicted structure as SVG");
  render_cmd->add_option("--data", rd.data, "Scenes (JSON lines)")->required();
  render_cmd->add_option("--pred", rd.pred, "Predictions (JSON lines); ground truth when omitted");
  render_cmd->add_option("--out", rd.out, "SVG path")->required();
  render_cmd->add_option("--index", rd.index, "Scene index");
  render_cmd->add_option("--size", rd.size, "Canvas side in pixels")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kBadArguments;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*infer_cmd) return cmd_infer(inf);
    if (*gc_cmd) return cmd_grad_check(gc_seed);
    if (*render_cmd) return cmd_render(rd);
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return kBadArguments;
  } catch (const IoError& e) {
    print_error("io", e.what());
    return kIoError;
  } catch (const NumericError& e) {
    print_error("numeric", e.what());
    return kNumericError;
  } catch (const fs::filesystem_error& e) {
    print_error("io", e.what());
    return kIoError;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kFailure;
  }
  return kFailure;
}

}  // namespace ctbg::cli
