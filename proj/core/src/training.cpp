// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "ctbg/error.hpp"
#include "ctbg/io.hpp"
#include "ctbg/numcore/checkpoint.hpp"
#include "ctbg/numcore/ops.hpp"
#include "json.hpp"

namespace ctbg {

void TrainConfig::validate() const {
  if (!(adam.lr > 0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1))
    throw ConfigError("betas must lie in [0,1)");
  if (!(adam.eps > 0)) throw ConfigError("eps must be positive");
  if (!(adam.weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (total_iters == 0) throw ConfigError("total_iters must be positive");
  if (warmup_iters >= total_iters) throw ConfigError("warmup_iters must be smaller than total_iters");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
}

double learning_rate(std::size_t iter, const TrainConfig& cfg) {
  if (cfg.warmup_iters == 0 || iter >= cfg.warmup_iters) return cfg.adam.lr;
  return cfg.adam.lr * static_cast<double>(iter) / static_cast<double>(cfg.warmup_iters);
}

std::vector<std::size_t> successor_labels(const Scene& scene) {
  return successors_from_blocks(scene.units.size(), scene.blocks);
}

template <class T>
std::vector<T> edge_labels(std::span<const EdgeProposal> proposals, std::span<const std::size_t> successors) {
  std::vector<T> out;
  out.reserve(proposals.size());
  for (const auto& p : proposals) {
    if (p.src >= successors.size()) throw ShapeError("proposal source outside the label range");
    out.push_back(successors[p.src] == p.dst ? T{1} : T{0});
  }
  return out;
}

template <class T>
Var<T> loss_relation(Var<T> logits, std::span<const std::size_t> successors) {
  if (logits.rows() != successors.size()) throw ShapeError("one relation label per row is required");
  return ops::softmax_cross_entropy(logits, successors);
}

template <class T>
Var<T> loss_edge(Var<T> logits, std::span<const T> labels) {
  const std::size_t m = logits.shape().empty() ? 1 : logits.shape()[0];
  if (m != labels.size()) throw ShapeError("edge logits and labels differ in length");
  return ops::bce_with_logits(logits, labels);
}

template <class T>
LossBreakdown<T> loss_overall(const ForwardResult<T>& result, std::span<const std::size_t> successors,
                              std::size_t layers) {
  if (result.relation_logits.size() != layers + 1) throw ConfigError("missing relation-score cache");
  if (result.edge_logits.size() != layers || result.classified.size() != layers)
    throw ConfigError("missing edge-classification cache");
  LossBreakdown<T> out;
  for (const auto& s : result.relation_logits) {
    out.relation.push_back(loss_relation(s, successors));
    out.total = out.total.valid() ? ops::add(out.total, out.relation.back()) : out.relation.back();
  }
  for (std::size_t l = 0; l < layers; ++l) {
    const auto labels = edge_labels<T>(result.classified[l], successors);
    out.edge.push_back(loss_edge<T>(result.edge_logits[l], labels));
    out.total = ops::add(out.total, out.edge.back());
  }
  return out;
}

template <class T>
ForwardResult<T> run_scene(const Model<T>& model, Tape<T>& tape, const Scene& scene,
                           const ForwardOptions& options) {
  const auto& mc = model.config();
  const auto features = cast_pyramid<T>(rasterize(scene, RasterConfig{mc.raster_size, mc.raster_size, mc.levels}));
  return model.forward(tape, scene.units, features, options);
}

namespace {

struct SceneStep {
  std::vector<std::vector<float>> grads;
  double total = 0;
  double rel_final = 0;
  double edge_final = 0;
};

SceneStep scene_step(const Model<float>& model, const Scene& scene,
                     std::span<const Parameter<float>* const> params) {
  Tape<float> tape;
  const auto result = run_scene(model, tape, scene);
  const auto labels = successor_labels(scene);
  const auto loss = loss_overall(result, labels, model.config().layers);
  SceneStep s;
  s.total = loss.total.item();
  s.rel_final = loss.relation.back().item();
  s.edge_final = loss.edge.back().item();
  s.grads = tape.gradients(loss.total, params);
  return s;
}

std::string checkpoint_metadata(const ModelConfig& mc, std::size_t iter, std::uint64_t seed) {
  nlohmann::json j;
  j["model"] = nlohmann::json::parse(model_config_to_json(mc));
  j["iter"] = iter;
  j["seed"] = seed;
  return j.dump();
}

}  // namespace

std::vector<LossLogRow> train(Model<float>& model, std::span<const Scene> corpus, const TrainConfig& cfg,
                              std::uint64_t seed, const TrainOutputs& outputs) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("training corpus is empty");

  auto state = make_adam_state(model.params(), cfg.adam);
  const auto params = model.params().pointers();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::ofstream log_file;
  if (!outputs.dir.empty()) {
    std::filesystem::create_directories(outputs.dir);
    log_file.open(outputs.dir / "loss_log.csv", std::ios::trunc);
    if (!log_file) throw IoError("cannot write " + (outputs.dir / "loss_log.csv").string());
    log_file << "iter,lr,loss_total,loss_rel_final,loss_edge_final\n";
  }

  const std::size_t last =
      outputs.stop_after == 0 ? cfg.total_iters : std::min(outputs.stop_after, cfg.total_iters);
  std::vector<LossLogRow> log;
  log.reserve(last);
  for (std::size_t it = 1; it <= last; ++it) {
    std::vector<std::size_t> batch;
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::vector<SceneStep> steps(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
    auto work = [&](std::size_t first) {
      for (std::size_t b = first; b < batch.size(); b += cfg.workers) {
        try {
          steps[b] = scene_step(model, corpus[batch[b]], params);
        } catch (...) {
          errors[b] = std::current_exception();
        }
      }
    };
    if (cfg.workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min(cfg.workers, batch.size()); ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (!errors[b]) continue;
      try {
        std::rethrow_exception(errors[b]);
      } catch (const NumericError& e) {
        throw NumericError("iteration " + std::to_string(it) + ", scene " + std::to_string(batch[b]) +
                           ": " + e.what());
      }
    }

    const float inv = 1.0f / static_cast<float>(batch.size());
    auto grads = std::move(steps[0].grads);
    for (std::size_t b = 1; b < batch.size(); ++b)
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (std::size_t k = 0; k < grads[p].size(); ++k) grads[p][k] += steps[b].grads[p][k];
    for (auto& g : grads)
      for (auto& v : g) v *= inv;

    LossLogRow row;
    row.iter = it;
    row.lr = learning_rate(it, cfg);
    for (const auto& s : steps) {
      row.loss_total += s.total / static_cast<double>(batch.size());
      row.loss_rel_final += s.rel_final / static_cast<double>(batch.size());
      row.loss_edge_final += s.edge_final / static_cast<double>(batch.size());
    }
    if (!std::isfinite(row.loss_total)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it));
    }
    adam_step(state, model.params(), grads, row.lr);

    log.push_back(row);
    if (log_file.is_open()) {
      char line[160];
      std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", row.iter, row.lr, row.loss_total,
                    row.loss_rel_final, row.loss_edge_final);
      log_file << line << std::flush;
    }
    if (outputs.on_iteration) outputs.on_iteration(row);
    if (!outputs.dir.empty() && it % cfg.checkpoint_every == 0) {
      save_checkpoint(outputs.dir / ("checkpoint_" + std::to_string(it) + ".json"), model.params(),
                      checkpoint_metadata(model.config(), it, seed));
    }
  }
  if (!outputs.dir.empty()) {
    save_checkpoint(outputs.dir / "checkpoint.json", model.params(),
                    checkpoint_metadata(model.config(), last, seed));
  }
  return log;
}

#define CTBG_INSTANTIATE(T)                                                                          \
  template std::vector<T> edge_labels<T>(std::span<const EdgeProposal>, std::span<const std::size_t>); \
  template Var<T> loss_relation<T>(Var<T>, std::span<const std::size_t>);                            \
  template Var<T> loss_edge<T>(Var<T>, std::span<const T>);                                          \
  template LossBreakdown<T> loss_overall<T>(const ForwardResult<T>&, std::span<const std::size_t>,   \
                                            std::size_t);                                            \
  template ForwardResult<T> run_scene<T>(const Model<T>&, Tape<T>&, const Scene&, const ForwardOptions&);

CTBG_INSTANTIATE(float)
CTBG_INSTANTIATE(double)
#undef CTBG_INSTANTIATE

}  // namespace ctbg
