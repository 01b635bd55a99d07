// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctbg/dreamer.hpp"
#include "ctbg/metrics.hpp"
#include "ctbg/synthgen.hpp"
#include "ctbg/training.hpp"

namespace ctbg {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// {"units":[[x0,y0,x1,y1],...],"blocks":[[i,...],...]} on one line.
std::string scene_to_json(const Scene& scene);
/// Parses and validates a scene; ConfigError on malformed input.
Scene scene_from_json(std::string_view text);

/// One scene per line.
void write_scenes(const std::filesystem::path& path, std::span<const Scene> scenes);
std::vector<Scene> read_scenes(const std::filesystem::path& path);

/// {"units":[...],"edges":[[src,dst,score],...],"blocks":[[i,...],...]}.
std::string prediction_to_json(const ScenePrediction& pred);
/// "units" may be absent, leaving ScenePrediction::units empty.
ScenePrediction prediction_from_json(std::string_view text);

void write_predictions(const std::filesystem::path& path, std::span<const ScenePrediction> preds);
std::vector<ScenePrediction> read_predictions(const std::filesystem::path& path);

/// {"iou_0.50":{"la":..,"lc":..,"ga":..},"iou_0.75":{...},"iou_avg":{...}}
std::string report_to_json(const MetricReport& report);

// Config objects as JSON. Missing keys keep their defaults; unknown keys are
// rejected with ConfigError.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(std::string_view text);
std::string difficulty_config_to_json(const DifficultyConfig& cfg);
DifficultyConfig difficulty_config_from_json(std::string_view text);

}  // namespace ctbg
