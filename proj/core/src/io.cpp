// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "ctbg/error.hpp"
#include "json.hpp"

namespace ctbg {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

json parse(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + ": " + e.what());
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

json boxes_to_json(std::span<const UnitBox> boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back({b.x0, b.y0, b.x1, b.y1});
  return arr;
}

json blocks_to_json(std::span<const Block> blocks) {
  json arr = json::array();
  for (const auto& b : blocks) arr.push_back(b);
  return arr;
}

std::vector<UnitBox> boxes_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("\"units\" must be an array");
  std::vector<UnitBox> out;
  for (const auto& b : j) {
    if (!b.is_array() || b.size() != 4) throw ConfigError("a unit must be [x0,y0,x1,y1]");
    for (const auto& v : b)
      if (!v.is_number()) throw ConfigError("unit coordinates must be numbers");
    out.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  return out;
}

std::size_t index_from_json(const json& v) {
  if (!v.is_number_unsigned()) throw ConfigError("unit indices must be non-negative integers");
  return v.get<std::size_t>();
}

std::vector<Block> blocks_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("\"blocks\" must be an array");
  std::vector<Block> out;
  for (const auto& b : j) {
    if (!b.is_array()) throw ConfigError("a block must be an array of indices");
    Block blk;
    for (const auto& v : b) blk.push_back(index_from_json(v));
    out.push_back(std::move(blk));
  }
  return out;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string("unknown key \"") + key + "\" in " + what);
  }
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  json j;
  j["units"] = boxes_to_json(scene.units);
  j["blocks"] = blocks_to_json(scene.blocks);
  return j.dump();
}

Scene scene_from_json(std::string_view text) {
  const json j = parse(text, "scene");
  require_keys(j, {"units", "blocks"}, "scene");
  if (!j.contains("units") || !j.contains("blocks")) throw ConfigError("scene needs \"units\" and \"blocks\"");
  Scene s{boxes_from_json(j["units"]), blocks_from_json(j["blocks"])};
  validate_scene(s);
  return s;
}

void write_scenes(const std::filesystem::path& path, std::span<const Scene> scenes) {
  std::string text;
  for (const auto& s : scenes) text += scene_to_json(s) + "\n";
  write_text(path, text);
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::vector<Scene> out;
  for (const auto& line : split_lines(read_text(path))) out.push_back(scene_from_json(line));
  return out;
}

std::string prediction_to_json(const ScenePrediction& pred) {
  json j;
  j["units"] = boxes_to_json(pred.units);
  json edges = json::array();
  for (const auto& e : pred.edges) edges.push_back({e.src, e.dst, e.score});
  j["edges"] = edges;
  j["blocks"] = blocks_to_json(pred.blocks);
  return j.dump();
}

ScenePrediction prediction_from_json(std::string_view text) {
  const json j = parse(text, "prediction");
  require_keys(j, {"units", "edges", "blocks"}, "prediction");
  if (!j.contains("blocks")) throw ConfigError("prediction needs \"blocks\"");
  ScenePrediction p;
  if (j.contains("units")) p.units = boxes_from_json(j["units"]);
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw ConfigError("\"edges\" must be an array");
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 3 || !e[2].is_number()) throw ConfigError("an edge must be [src,dst,score]");
      p.edges.push_back({index_from_json(e[0]), index_from_json(e[1]), e[2].get<double>()});
    }
  }
  p.blocks = blocks_from_json(j["blocks"]);
  return p;
}

void write_predictions(const std::filesystem::path& path, std::span<const ScenePrediction> preds) {
  std::string text;
  for (const auto& p : preds) text += prediction_to_json(p) + "\n";
  write_text(path, text);
}

std::vector<ScenePrediction> read_predictions(const std::filesystem::path& path) {
  std::vector<ScenePrediction> out;
  for (const auto& line : split_lines(read_text(path))) out.push_back(prediction_from_json(line));
  return out;
}

std::string report_to_json(const MetricReport& report) {
  auto triple = [](const MetricTriple& t) { return json{{"la", t.la}, {"lc", t.lc}, {"ga", t.ga}}; };
  json j;
  j["iou_0.50"] = triple(report.iou50);
  j["iou_0.75"] = triple(report.iou75);
  j["iou_avg"] = triple(report.iou_avg);
  json sweep = json::object();
  for (std::size_t k = 0; k < kIouSweep; ++k) {
    char key[16];
    std::snprintf(key, sizeof key, "%.2f", sweep_threshold(k));
    sweep[key] = triple(report.sweep[k]);
  }
  j["sweep"] = sweep;
  return j.dump(2);
}

// ---- configs ----------------------------------------------------------------

namespace {

template <class Visit>
void visit_fields(ModelConfig& c, Visit&& f) {
  f("dim", c.dim);
  f("heads", c.heads);
  f("levels", c.levels);
  f("points", c.points);
  f("ffn_dim", c.ffn_dim);
  f("layers", c.layers);
  f("top_k", c.top_k);
  f("prune_threshold", c.prune_threshold);
  f("accept_threshold", c.accept_threshold);
  f("dgsr", c.dgsr);
  f("caf", c.caf);
  f("rasa", c.rasa);
  f("pos_freqs", c.pos_freqs);
  f("raster_size", c.raster_size);
}

template <class Visit>
void visit_fields(TrainConfig& c, Visit&& f) {
  f("lr", c.adam.lr);
  f("beta1", c.adam.beta1);
  f("beta2", c.adam.beta2);
  f("eps", c.adam.eps);
  f("weight_decay", c.adam.weight_decay);
  f("warmup_iters", c.warmup_iters);
  f("total_iters", c.total_iters);
  f("batch_size", c.batch_size);
  f("checkpoint_every", c.checkpoint_every);
  f("workers", c.workers);
}

template <class Visit>
void visit_fields(DifficultyConfig& c, Visit&& f) {
  f("min_blocks", c.min_blocks);
  f("max_blocks", c.max_blocks);
  f("min_units", c.min_units);
  f("max_units", c.max_units);
  f("wrap_prob", c.wrap_prob);
  f("max_rows", c.max_rows);
  f("jitter", c.jitter);
  f("margin", c.margin);
  f("overlap_prob", c.overlap_prob);
  f("min_height", c.min_height);
  f("max_height", c.max_height);
  f("min_aspect", c.min_aspect);
  f("max_aspect", c.max_aspect);
  f("height_variation", c.height_variation);
  f("max_row_width", c.max_row_width);
  f("placement_retries", c.placement_retries);
  f("scene_retries", c.scene_retries);
}

template <class Cfg>
std::string config_to_json(Cfg cfg) {
  json j = json::object();
  visit_fields(cfg, [&](const char* key, const auto& v) { j[key] = v; });
  return j.dump(2);
}

template <class Cfg>
Cfg config_from_json(std::string_view text, const char* what) {
  const json j = parse(text, what);
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  Cfg cfg;
  std::set<std::string> known;
  visit_fields(cfg, [&](const char* key, auto& v) {
    known.insert(key);
    const auto it = j.find(key);
    if (it == j.end()) return;
    using V = std::decay_t<decltype(v)>;
    const std::string where = std::string(what) + "." + key;
    if constexpr (std::is_same_v<V, bool>) {
      if (!it->is_boolean()) throw ConfigError(where + " must be a boolean");
    } else if constexpr (std::is_integral_v<V>) {
      if (!it->is_number_unsigned()) throw ConfigError(where + " must be a non-negative integer");
    } else {
      if (!it->is_number()) throw ConfigError(where + " must be a number");
    }
    v = it->template get<V>();
  });
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + what);
  }
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_to_json(cfg); }
ModelConfig model_config_from_json(std::string_view text) {
  auto cfg = config_from_json<ModelConfig>(text, "model");
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) { return config_to_json(cfg); }
TrainConfig train_config_from_json(std::string_view text) {
  auto cfg = config_from_json<TrainConfig>(text, "train");
  cfg.validate();
  return cfg;
}

std::string difficulty_config_to_json(const DifficultyConfig& cfg) { return config_to_json(cfg); }
DifficultyConfig difficulty_config_from_json(std::string_view text) {
  auto cfg = config_from_json<DifficultyConfig>(text, "difficulty");
  cfg.validate();
  return cfg;
}

}  // namespace ctbg
