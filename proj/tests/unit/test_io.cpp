// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <vector>

#include "ctbg/error.hpp"
#include "ctbg/io.hpp"
#include "doctest.h"

using namespace ctbg;

namespace {

std::filesystem::path scratch(const char* name) {
  const auto p = std::filesystem::temp_directory_path() / "ctbg_io_test" / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("scene round trip") {
  const auto corpus = generate_corpus(5, 4, hard_difficulty());
  for (const auto& s : corpus) CHECK(scene_from_json(scene_to_json(s)) == s);
  const auto path = scratch("scenes.jsonl");
  write_scenes(path, corpus);
  CHECK(read_scenes(path) == corpus);
  // writing twice yields identical bytes
  const auto first = read_text(path);
  write_scenes(path, corpus);
  CHECK(read_text(path) == first);
}

TEST_CASE("malformed scenes are rejected") {
  CHECK_THROWS_AS(scene_from_json("{"), ConfigError);
  CHECK_THROWS_AS(scene_from_json(R"({"units":[[0.1,0.1,0.2,0.2]],"blocks":[[0]],"extra":1})"), ConfigError);
  CHECK_THROWS_AS(scene_from_json(R"({"units":[[0.1,0.1,0.2,0.2]],"blocks":[[0,0]]})"), ConfigError);
  CHECK_THROWS_AS(scene_from_json(R"({"units":[[0.1,0.1,0.2]],"blocks":[[0]]})"), ConfigError);
  CHECK_THROWS_AS(read_scenes(scratch("missing.jsonl")), IoError);
}

TEST_CASE("prediction round trip") {
  const ScenePrediction p{{{.1, .1, .2, .2}, {.3, .1, .4, .2}}, {{0, 1, 0.75}}, {{0, 1}}};
  const auto back = prediction_from_json(prediction_to_json(p));
  CHECK(back.units == p.units);
  CHECK(back.edges == p.edges);
  CHECK(back.blocks == p.blocks);
  const auto bare = prediction_from_json(R"({"edges":[],"blocks":[[1],[0]]})");
  CHECK(bare.units.empty());
  CHECK(bare.blocks == std::vector<Block>{{1}, {0}});
  const auto path = scratch("pred.jsonl");
  write_predictions(path, std::vector<ScenePrediction>{p, bare});
  CHECK(read_predictions(path).size() == 2);
}

TEST_CASE("report JSON") {
  MetricReport r;
  r.iou50 = {1, 0.5, 0.25};
  const auto j = report_to_json(r);
  CHECK(j.find("\"iou_0.50\"") != std::string::npos);
  CHECK(j.find("\"iou_0.75\"") != std::string::npos);
  CHECK(j.find("\"iou_avg\"") != std::string::npos);
}

TEST_CASE("config round trips and strictness") {
  ModelConfig m;
  m.dim = 24;
  m.heads = 3;
  m.dgsr = false;
  const auto mb = model_config_from_json(model_config_to_json(m));
  CHECK(mb.dim == 24);
  CHECK(mb.heads == 3);
  CHECK_FALSE(mb.dgsr);
  CHECK(model_config_from_json("{}").dim == ModelConfig{}.dim);
  CHECK_THROWS_AS(model_config_from_json(R"({"dimm":4})"), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(R"({"dim":"big"})"), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(R"({"dim":30,"heads":4})"), ConfigError);

  TrainConfig t;
  t.total_iters = 77;
  t.warmup_iters = 10;
  t.adam.lr = 1e-3;
  const auto tb = train_config_from_json(train_config_to_json(t));
  CHECK(tb.total_iters == 77);
  CHECK(tb.adam.lr == 1e-3);
  CHECK_THROWS_AS(train_config_from_json(R"({"iters":4})"), ConfigError);

  const auto h = hard_difficulty();
  const auto hb = difficulty_config_from_json(difficulty_config_to_json(h));
  CHECK(generate_scene(3, hb) == generate_scene(3, h));
}

}  // TEST_SUITE
