// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ctbg/training.hpp"

namespace ctbg {

ModelConfig micro_model_config() {
  ModelConfig c;
  c.dim = 8;
  c.heads = 2;
  c.levels = 2;
  c.points = 2;
  c.ffn_dim = 16;
  c.layers = 1;
  c.top_k = 2;
  c.pos_freqs = 2;
  c.raster_size = 16;
  return c;
}

Scene micro_scene() {
  Scene s;
  s.units = {{0.10, 0.20, 0.30, 0.28}, {0.34, 0.21, 0.52, 0.29}, {0.15, 0.60, 0.45, 0.70}};
  s.blocks = {{0, 1}, {2}};
  return s;
}

namespace {

double scene_loss(const Model<double>& model, const Scene& scene, const FeaturePyramid<double>& features,
                  const std::vector<std::size_t>& labels) {
  Tape<double> tape;
  const auto result = model.forward(tape, scene.units, features);
  return loss_overall(result, labels, model.config().layers).total.item();
}

}  // namespace

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  const auto mc = micro_model_config();
  Model<double> model(mc, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (auto& p : model.params()) init_uniform(p, cfg.param_scale, rng);

  const Scene scene = micro_scene();
  const auto features = rasterize(scene, RasterConfig{mc.raster_size, mc.raster_size, mc.levels});
  const auto labels = successor_labels(scene);

  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    const auto result = model.forward(tape, scene.units, features);
    const auto loss = loss_overall(result, labels, mc.layers);
    analytic = tape.gradients(loss.total, model.params().pointers());
  }

  GradCheckReport report;
  const double h = cfg.step;
  for (std::size_t pi = 0; pi < model.params().size(); ++pi) {
    auto& param = model.params()[pi];
    for (std::size_t k = 0; k < param.value.data.size(); ++k) {
      double& x = param.value.data[k];
      const double x0 = x;
      auto diff = [&](double step) {
        x = x0 + step;
        const double up = scene_loss(model, scene, features, labels);
        x = x0 - step;
        const double down = scene_loss(model, scene, features, labels);
        x = x0;
        return (up - down) / (2 * step);
      };
      const double numeric = (4 * diff(h) - diff(2 * h)) / 3;
      const double a = analytic[pi][k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), cfg.abs_floor});
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_param.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_param = param.name;
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < cfg.tolerance;
  return report;
}

}  // namespace ctbg
