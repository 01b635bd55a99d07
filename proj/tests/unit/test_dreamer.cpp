// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "ctbg/dreamer.hpp"
#include "ctbg/error.hpp"
#include "ctbg/synthgen.hpp"
#include "ctbg/training.hpp"
#include "doctest.h"

using namespace ctbg;

namespace {

RelationScores scores_from(std::size_t n, std::vector<double> finite) {
  RelationScores s{n, std::vector<double>(n * (n + 1))};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= n; ++j)
      s.logits[i * (n + 1) + j] = i == j ? -std::numeric_limits<double>::infinity() : finite[i * (n + 1) + j];
  return s;
}

RelationScores random_scores(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> v(n * (n + 1));
  for (auto& x : v) x = u(rng);
  return scores_from(n, v);
}

EdgeProposal proposal(std::size_t s, std::size_t d, double score) { return {s, d, UnitBox{}, score, 0}; }

std::vector<Block> sorted_blocks(std::vector<Block> b) {
  std::sort(b.begin(), b.end());
  return b;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.layers = 2;
  c.raster_size = 16;
  return c;
}

FeaturePyramid<double> features_for(const Scene& s, const ModelConfig& mc) {
  return rasterize(s, RasterConfig{mc.raster_size, mc.raster_size, mc.levels});
}

std::vector<double> row(Var<double> v, std::size_t r) {
  const std::size_t c = v.cols();
  return std::vector<double>(v.value().begin() + static_cast<std::ptrdiff_t>(r * c),
                             v.value().begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
}

}  // namespace

TEST_SUITE("dreamer") {

TEST_CASE("model config validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  ModelConfig c;
  c.top_k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.prune_threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.dim = 30;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("top successors skip the diagonal and EOB, ties to lower index") {
  const auto s = scores_from(4, {0, 5, 5, 1, 9,   //
                                 2, 0, 2, 2, 0,   //
                                 1, 1, 0, 3, 0,   //
                                 0, 0, 0, 0, 0});
  CHECK(top_successors(s, 0, 2) == std::vector<std::size_t>{1, 2});
  CHECK(top_successors(s, 1, 3) == std::vector<std::size_t>{0, 2, 3});
  CHECK(top_successors(s, 2, 1) == std::vector<std::size_t>{3});
  CHECK(top_successors(s, 3, 5) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("initial proposal counts") {
  std::mt19937_64 rng(1);
  CHECK(initial_proposal_pairs(random_scores(rng, 2), 3).size() == 2);
  CHECK(initial_proposal_pairs(random_scores(rng, 4), 3).size() == 12);
  CHECK(initial_proposal_pairs(random_scores(rng, 1), 3).empty());
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 8;
    const auto pairs = initial_proposal_pairs(random_scores(rng, n), 3);
    CHECK(pairs.size() == std::min<std::size_t>(3, n - 1) * n);
    CHECK(std::set(pairs.begin(), pairs.end()).size() == pairs.size());
  }
}

TEST_CASE("plan_refinement") {
  std::mt19937_64 rng(2);
  const auto s = random_scores(rng, 3);
  SUBCASE("all scores above the threshold keep everything") {
    const std::vector<EdgeProposal> p{proposal(0, 1, .9), proposal(1, 2, .7), proposal(2, 0, .5)};
    const auto plan = plan_refinement(3, p, s, 3, 0.5);
    CHECK(plan.kept == std::vector<std::size_t>{0, 1, 2});
    CHECK(plan.added.empty());
  }
  SUBCASE("all scores below the threshold re-propose for every node") {
    const auto n = 5;
    const auto s5 = random_scores(rng, n);
    std::vector<EdgeProposal> p;
    for (const auto& [a, b] : initial_proposal_pairs(s5, 3)) p.push_back(proposal(a, b, 0.2));
    const auto plan = plan_refinement(n, p, s5, 3, 0.5);
    CHECK(plan.kept.empty());
    CHECK(plan.added.size() == 3 * n);
  }
  SUBCASE("mixed case") {
    const std::vector<EdgeProposal> p{proposal(0, 2, .1), proposal(1, 2, .9)};
    const auto plan = plan_refinement(3, p, s, 2, 0.5);
    CHECK(plan.kept == std::vector<std::size_t>{1});
    // node 2 has no outgoing proposal either, so it is isolated too
    for (const auto& [a, b] : plan.added) CHECK(a != 1);
    std::size_t from0 = 0;
    for (const auto& [a, b] : plan.added) from0 += a == 0;
    CHECK(from0 == 2);
  }
  SUBCASE("new pairs never duplicate survivors") {
    for (int t = 0; t < 200; ++t) {
      const std::size_t n = 2 + rng() % 6;
      const auto sc = random_scores(rng, n);
      std::vector<EdgeProposal> p;
      std::uniform_real_distribution<double> u(0, 1);
      for (const auto& [a, b] : initial_proposal_pairs(sc, 3)) p.push_back(proposal(a, b, u(rng)));
      const auto plan = plan_refinement(n, p, sc, 3, 0.5);
      std::set<std::pair<std::size_t, std::size_t>> all;
      for (auto k : plan.kept) all.emplace(p[k].src, p[k].dst);
      for (const auto& e : plan.added) CHECK(all.insert(e).second);
      std::vector<char> has_out(n, 0);
      for (const auto& [a, b] : all) has_out[a] = 1;
      for (std::size_t i = 0; i < n; ++i) CHECK(has_out[i]);
    }
  }
}

TEST_CASE("select_final_edges") {
  std::mt19937_64 rng(3);
  const auto s = random_scores(rng, 3);
  CHECK(select_final_edges(3, std::vector<EdgeProposal>{proposal(0, 1, .3)}, s, 0.5).empty());
  const auto picked =
      select_final_edges(3, std::vector<EdgeProposal>{proposal(0, 1, .6), proposal(0, 2, .9), proposal(1, 2, .55)}, s, 0.5);
  REQUIRE(picked.size() == 2);
  CHECK(picked[0] == Edge{0, 2, .9});
  CHECK(picked[1] == Edge{1, 2, .55});

  const auto tied = scores_from(3, {0, 1, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto by_relation =
      select_final_edges(3, std::vector<EdgeProposal>{proposal(0, 1, .8), proposal(0, 2, .8)}, tied, 0.5);
  CHECK(by_relation == EdgeSet{{0, 2, .8}});
  const auto flat = scores_from(3, std::vector<double>(12, 0.0));
  const auto by_index =
      select_final_edges(3, std::vector<EdgeProposal>{proposal(0, 2, .8), proposal(0, 1, .8)}, flat, 0.5);
  CHECK(by_index == EdgeSet{{0, 1, .8}});
}

TEST_CASE("box geometry encoding") {
  const auto e = encode_box_geometry({0.1, 0.2, 0.4, 0.3}, 2);
  REQUIRE(e.size() == 6 * 5);
  CHECK(e[4] == doctest::Approx(0.3));
  CHECK(e[5] == doctest::Approx(0.1));
  CHECK(e[6] == doctest::Approx(std::sin(M_PI * 0.1)));
  CHECK(e[9] == doctest::Approx(std::cos(2 * M_PI * 0.1)));
}

TEST_CASE("node encoding") {
  const auto mc = tiny_config();
  Model<double> model(mc, 4);
  const Scene s{{{0.1, 0.1, 0.2, 0.15}, {0.5, 0.5, 0.6, 0.55}, {0.1, 0.1, 0.2, 0.15}}, {{0}, {1}, {2}}};
  const auto f = features_for(s, mc);
  Tape<double> tape;
  const auto nodes = model.encode_nodes(tape, s.units, f);
  CHECK(nodes.embeddings.shape() == Shape{3, mc.dim});
  CHECK(row(nodes.embeddings, 0) == row(nodes.embeddings, 2));
  CHECK(row(nodes.embeddings, 0) != row(nodes.embeddings, 1));
  CHECK_THROWS_AS(model.encode_nodes(tape, std::vector<UnitBox>{}, f), ConfigError);

  SUBCASE("a zeroed geometry branch leaves the feature branch") {
    for (auto& p : model.params())
      if (p.name.rfind("encoder.geometry_out", 0) == 0) init_constant(p, 0.0);
    Tape<double> t2;
    const auto zeroed = model.encode_nodes(t2, s.units, f);
    const auto* w = model.params().find("encoder.features.weight");
    const auto* b = model.params().find("encoder.features.bias");
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> samples;
      for (std::size_t l = 0; l < mc.levels; ++l) {
        const auto v = bilinear_sample(f[l], {to_raster(s.units[i].cx(), f[l].shape[2]),
                                              to_raster(s.units[i].cy(), f[l].shape[1])});
        samples.insert(samples.end(), v.data.begin(), v.data.end());
      }
      for (std::size_t k = 0; k < mc.dim; ++k) {
        double expected = b->value.data[k];
        for (std::size_t c = 0; c < samples.size(); ++c) expected += samples[c] * w->value.at(c, k);
        CHECK(zeroed.embeddings.value()[i * mc.dim + k] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("relation scores") {
  const auto mc = tiny_config();
  Model<double> model(mc, 5);
  std::mt19937_64 rng(5);
  SUBCASE("a single node can only end its block") {
    Tape<double> tape;
    Tensor<double> x(Shape{1, mc.dim});
    for (auto& v : x.data) v = 0.3;
    auto s = model.relation_scores(tape, 0, tape.constant(x));
    CHECK(s.shape() == Shape{1, 2});
    CHECK(std::isinf(s.value()[0]));
    auto p = ops::softmax_rows(s);
    CHECK(p.value()[1] == 1.0);
  }
  SUBCASE("shape, masked diagonal and permutation equivariance") {
    const std::size_t n = 4;
    Tensor<double> x(Shape{n, mc.dim});
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : x.data) v = u(rng);
    Tensor<double> swapped = x;
    for (std::size_t k = 0; k < mc.dim; ++k) std::swap(swapped.at(1, k), swapped.at(3, k));
    Tape<double> tape;
    auto a = model.relation_scores(tape, 1, tape.constant(x));
    auto b = model.relation_scores(tape, 1, tape.constant(swapped));
    CHECK(a.shape() == Shape{n, n + 1});
    const std::vector<std::size_t> perm{0, 3, 2, 1};
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::isinf(a.value()[i * (n + 1) + i]));
      for (std::size_t j = 0; j <= n; ++j) {
        const std::size_t pj = j == n ? n : perm[j];
        const double va = a.value()[perm[i] * (n + 1) + pj], vb = b.value()[i * (n + 1) + j];
        if (std::isinf(va)) {
          CHECK(std::isinf(vb));
        } else {
          CHECK(vb == doctest::Approx(va).epsilon(1e-12));
        }
      }
    }
  }
  CHECK_THROWS_AS(([&] {
                    Tape<double> tape;
                    model.relation_scores(tape, mc.layers + 1, tape.constant(Tensor<double>(Shape{1, mc.dim})));
                  }()),
                  ConfigError);
}

TEST_CASE("edge query initialization") {
  const auto mc = tiny_config();
  Model<double> model(mc, 6);
  const auto scene = generate_scene(3, easy_difficulty());
  const auto f = features_for(scene, mc);
  const std::size_t n = scene.units.size();
  Tape<double> tape;
  auto nodes = model.encode_nodes(tape, scene.units, f);
  auto s0 = model.relation_scores(tape, 0, nodes.embeddings);
  const auto state = model.init_edge_queries(tape, nodes, s0, to_relation_scores(s0));
  CHECK(state.layer == 0);
  CHECK(state.proposals.size() == std::min<std::size_t>(mc.top_k, n - 1) * n);
  CHECK(state.edge_embeddings.shape() == Shape{state.proposals.size(), mc.dim});
  for (const auto& p : state.proposals) {
    CHECK(p.src != p.dst);
    CHECK(p.ref_box == union_box(scene.units[p.src], scene.units[p.dst]));
    CHECK(p.born_layer == 0);
  }
}

TEST_CASE("decoder layer") {
  auto mc = tiny_config();
  std::mt19937_64 rng(7);
  const Scene scene{{{0.1, 0.1, 0.2, 0.15}, {0.25, 0.1, 0.35, 0.15}, {0.6, 0.7, 0.7, 0.75}}, {{0, 1}, {2}}};

  auto build = [&](Model<double>& model, Tape<double>& tape, const FeaturePyramid<double>& f,
                   const std::vector<std::pair<std::size_t, std::size_t>>& live, Tensor<double> x) {
    DecoderState<double> st;
    st.nodes = NodeState<double>{tape.constant(std::move(x)), scene.units};
    for (const auto& [a, b] : live) st.proposals.push_back({a, b, union_box(scene.units[a], scene.units[b]), 0.9, 0});
    Tensor<double> e(Shape{live.size(), mc.dim});
    for (std::size_t k = 0; k < e.size(); ++k) e.data[k] = 0.01 * static_cast<double>(k % 17);
    st.edge_embeddings = tape.constant(std::move(e));
    return model.decoder_layer(tape, std::move(st), f);
  };
  Tensor<double> x(Shape{3, mc.dim});
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : x.data) v = u(rng);

  Model<double> model(mc, 8);
  const auto f = features_for(scene, mc);

  SUBCASE("shapes are preserved and the layer advances") {
    Tape<double> tape;
    const auto out = build(model, tape, f, {{0, 1}, {1, 0}}, x);
    CHECK(out.layer == 1);
    CHECK(out.nodes.embeddings.shape() == Shape{3, mc.dim});
    CHECK(out.edge_embeddings.shape() == Shape{2, mc.dim});
  }
  SUBCASE("bit-reproducible") {
    Tape<double> t1, t2;
    const auto a = build(model, t1, f, {{0, 1}}, x);
    const auto b = build(model, t2, f, {{0, 1}}, x);
    CHECK(a.nodes.embeddings.tensor().data == b.nodes.embeddings.tensor().data);
    CHECK(a.edge_embeddings.tensor().data == b.edge_embeddings.tensor().data);
  }
  SUBCASE("relation-aware attention isolates components") {
    Tensor<double> perturbed = x;
    for (std::size_t k = 0; k < mc.dim; ++k) perturbed.at(2, k) += 0.5;
    Tape<double> t1, t2;
    const auto a = build(model, t1, f, {{0, 1}}, x);
    const auto b = build(model, t2, f, {{0, 1}}, perturbed);
    CHECK(row(a.nodes.embeddings, 0) == row(b.nodes.embeddings, 0));
    CHECK(row(a.nodes.embeddings, 1) == row(b.nodes.embeddings, 1));
    CHECK(row(a.nodes.embeddings, 2) != row(b.nodes.embeddings, 2));

    mc.rasa = false;
    Model<double> open(mc, 8);
    Tape<double> t3, t4;
    const auto c = build(open, t3, f, {{0, 1}}, x);
    const auto d = build(open, t4, f, {{0, 1}}, perturbed);
    CHECK(row(c.nodes.embeddings, 0) != row(d.nodes.embeddings, 0));
  }
  SUBCASE("no proposals: nodes only see themselves") {
    Tape<double> tape;
    const auto out = build(model, tape, f, {}, x);
    CHECK(out.proposals.empty());
    CHECK(out.edge_embeddings.shape() == Shape{0, mc.dim});
  }
  SUBCASE("the attention order switch changes the computation") {
    mc.caf = false;
    Model<double> vanilla(mc, 8);
    Tape<double> t1, t2;
    const auto a = build(model, t1, f, {{0, 1}}, x);
    const auto b = build(vanilla, t2, f, {{0, 1}}, x);
    CHECK(a.nodes.embeddings.tensor().data != b.nodes.embeddings.tensor().data);
  }
  SUBCASE("past the last layer") {
    Tape<double> tape;
    auto st = build(model, tape, f, {{0, 1}}, x);
    st = model.decoder_layer(tape, std::move(st), f);
    CHECK_THROWS_AS(model.decoder_layer(tape, std::move(st), f), ConfigError);
  }
}

TEST_CASE("refinement keeps survivors and re-proposes for isolated nodes") {
  const auto mc = tiny_config();
  Model<double> model(mc, 9);
  const auto scene = generate_scene(11, easy_difficulty());
  const auto f = features_for(scene, mc);
  Tape<double> tape;
  auto nodes = model.encode_nodes(tape, scene.units, f);
  auto s0 = model.relation_scores(tape, 0, nodes.embeddings);
  const auto sel = to_relation_scores(s0);
  auto st = model.init_edge_queries(tape, nodes, s0, sel);
  st = model.decoder_layer(tape, std::move(st), f);
  for (std::size_t k = 0; k < st.proposals.size(); ++k) st.proposals[k].class_score = k % 3 == 0 ? 0.9 : 0.1;
  const auto before = st.proposals;
  const auto before_emb = st.edge_embeddings.tensor();
  const auto refined = model.refine_edges(tape, st, sel);
  const auto plan = plan_refinement(scene.units.size(), before, sel, mc.top_k, mc.prune_threshold);
  REQUIRE(refined.proposals.size() == plan.kept.size() + plan.added.size());
  for (std::size_t r = 0; r < plan.kept.size(); ++r) {
    CHECK(refined.proposals[r].src == before[plan.kept[r]].src);
    for (std::size_t k = 0; k < mc.dim; ++k)
      CHECK(refined.edge_embeddings.value()[r * mc.dim + k] == before_emb.at(plan.kept[r], k));
  }
  for (std::size_t r = plan.kept.size(); r < refined.proposals.size(); ++r) CHECK(refined.proposals[r].born_layer == 1);
  CHECK(refined.refined.size() == 1);

  auto off = mc;
  off.dgsr = false;
  Model<double> frozen(off, 9);
  const auto same = frozen.refine_edges(tape, st, sel);
  CHECK(same.proposals.size() == st.proposals.size());
}

TEST_CASE("forward pass") {
  const auto mc = tiny_config();
  Model<double> model(mc, 10);

  SUBCASE("one unit gives one singleton block") {
    const Scene s{{{0.4, 0.4, 0.5, 0.45}}, {{0}}};
    Tape<double> tape;
    const auto r = run_scene(model, tape, s);
    CHECK(r.edges.empty());
    CHECK(r.blocks == std::vector<Block>{{0}});
    CHECK(r.relation_logits.size() == mc.layers + 1);
    CHECK(r.edge_logits.size() == mc.layers);
  }
  SUBCASE("untrained model returns partitions") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = generate_scene(seed, seed % 2 ? hard_difficulty() : easy_difficulty());
      Tape<double> tape;
      const auto r = run_scene(model, tape, s);
      CHECK(is_partition(s.units.size(), r.blocks));
      for (std::size_t l = 0; l < mc.layers; ++l) {
        CHECK(r.edge_logits[l].rows() == r.classified[l].size());
      }
      CHECK(r.refined.size() == mc.layers - 1);
    }
  }
  SUBCASE("oracle scores reproduce the ground truth") {
    for (const auto& cfg : {easy_difficulty(), hard_difficulty()}) {
      for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto s = generate_scene(seed, cfg);
        const auto succ = successor_labels(s);
        ForwardOptions opt;
        opt.oracle_successors = &succ;
        Tape<double> tape;
        const auto r = run_scene(model, tape, s, opt);
        CHECK(sorted_blocks(r.blocks) == sorted_blocks(s.blocks));
      }
    }
  }
}

}  // TEST_SUITE
