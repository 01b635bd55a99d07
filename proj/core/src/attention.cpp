// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/attention.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "ctbg/error.hpp"

namespace ctbg {

void DeformAttnConfig::validate() const {
  if (heads == 0 || levels == 0 || points == 0 || dim == 0 || ffn_dim == 0) {
    throw ConfigError("attention sizes must be positive");
  }
  if (dim % heads != 0) throw ConfigError("model dim must be divisible by the head count");
}

AttnMask AttnMask::all_open(std::size_t n) {
  return AttnMask{n, std::vector<double>(n * n, 0.0)};
}

AttnMask relation_aware_mask(std::size_t n, const EdgeSet& proposals) {
  AttnMask mask{n, std::vector<double>(n * n, -std::numeric_limits<double>::infinity())};
  for (const auto& comp : connected_components(n, proposals)) {
    for (auto i : comp)
      for (auto j : comp) mask.additive[i * n + j] = 0.0;
  }
  return mask;
}

template <class T>
Linear<T> Linear<T>::create(ParameterStore<T>& store, const std::string& name, std::size_t in,
                            std::size_t out, std::mt19937_64& rng) {
  auto& w = store.add(name + ".weight", {in, out});
  init_uniform_fan_in(w, in, rng);
  auto& b = store.add(name + ".bias", {out});
  return Linear{&w, &b};
}

template <class T>
Var<T> Linear<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return ops::linear(x, tape.parameter(*weight), tape.parameter(*bias));
}

template <class T>
LayerNorm<T> LayerNorm<T>::create(ParameterStore<T>& store, const std::string& name,
                                  std::size_t dim) {
  auto& g = store.add(name + ".gain", {dim});
  init_constant(g, T{1});
  auto& b = store.add(name + ".bias", {dim});
  return LayerNorm{&g, &b};
}

template <class T>
Var<T> LayerNorm<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return ops::layer_norm(x, tape.parameter(*gain), tape.parameter(*bias));
}

template <class T>
FeedForward<T> FeedForward<T>::create(ParameterStore<T>& store, const std::string& name,
                                      std::size_t dim, std::size_t hidden, std::mt19937_64& rng) {
  auto up = Linear<T>::create(store, name + ".up", dim, hidden, rng);
  auto down = Linear<T>::create(store, name + ".down", hidden, dim, rng);
  return FeedForward{up, down};
}

template <class T>
Var<T> FeedForward<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return down(tape, ops::relu(up(tape, x)));
}

template <class T>
MultiHeadSelfAttention<T> MultiHeadSelfAttention<T>::create(ParameterStore<T>& store,
                                                            const std::string& name,
                                                            const DeformAttnConfig& cfg,
                                                            std::mt19937_64& rng) {
  cfg.validate();
  MultiHeadSelfAttention m;
  m.query = Linear<T>::create(store, name + ".query", cfg.dim, cfg.dim, rng);
  m.key = Linear<T>::create(store, name + ".key", cfg.dim, cfg.dim, rng);
  m.value = Linear<T>::create(store, name + ".value", cfg.dim, cfg.dim, rng);
  m.output = Linear<T>::create(store, name + ".output", cfg.dim, cfg.dim, rng);
  m.heads_ = cfg.heads;
  return m;
}

template <class T>
Var<T> MultiHeadSelfAttention<T>::forward(Tape<T>& tape, Var<T> x, const AttnMask* mask,
                                          std::vector<Tensor<T>>* head_weights) const {
  const std::size_t n = x.rows(), d = x.cols();
  if (mask != nullptr && mask->n != n) throw ShapeError("attention mask does not match query count");
  const std::size_t dh = d / heads_;
  auto q = query(tape, x);
  auto k = key(tape, x);
  auto v = value(tape, x);

  std::vector<T> additive;
  if (mask != nullptr) additive.assign(mask->additive.begin(), mask->additive.end());
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));

  if (head_weights != nullptr) head_weights->clear();
  std::vector<Var<T>> heads;
  heads.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    auto qh = ops::slice_cols(q, h * dh, dh);
    auto kh = ops::slice_cols(k, h * dh, dh);
    auto vh = ops::slice_cols(v, h * dh, dh);
    auto logits = ops::scale(ops::matmul_bt(qh, kh), inv_sqrt);
    if (mask != nullptr) logits = ops::add_mask<T>(logits, additive);
    auto attn = ops::softmax_rows(logits);
    if (head_weights != nullptr) head_weights->push_back(attn.tensor());
    heads.push_back(ops::matmul(attn, vh));
  }
  return output(tape, ops::concat_cols<T>(heads));
}

template <class T>
DeformableCrossAttention<T> DeformableCrossAttention<T>::create(ParameterStore<T>& store,
                                                                const std::string& name,
                                                                const DeformAttnConfig& cfg,
                                                                std::size_t channels,
                                                                std::mt19937_64& rng) {
  cfg.validate();
  DeformableCrossAttention m;
  m.cfg_ = cfg;
  m.channels_ = channels;
  const std::size_t samples = cfg.heads * cfg.levels * cfg.points;
  m.offsets = Linear<T>::create(store, name + ".offsets", cfg.dim, samples * 2, rng);
  init_constant(*store.find(name + ".offsets.weight"), T{0});
  m.weights = Linear<T>::create(store, name + ".weights", cfg.dim, samples, rng);
  m.value = Linear<T>::create(store, name + ".value", channels, cfg.dim, rng);
  m.output = Linear<T>::create(store, name + ".output", cfg.dim, cfg.dim, rng);
  return m;
}

template <class T>
Var<T> DeformableCrossAttention<T>::forward(Tape<T>& tape, Var<T> queries,
                                            std::span<const UnitBox> refs,
                                            const FeaturePyramid<T>& features) const {
  const std::size_t n = queries.rows();
  if (refs.size() != n) throw ShapeError("deformable attention: one reference box per query");
  if (features.size() < cfg_.levels) throw ShapeError("deformable attention: too few feature levels");
  const std::size_t lp = cfg_.levels * cfg_.points;

  auto off = offsets(tape, queries);
  auto logits = ops::reshape(weights(tape, queries), {n * cfg_.heads, lp});
  auto attn = ops::reshape(ops::softmax_rows(logits), {n, cfg_.heads * lp});
  const std::vector<Var<T>> rows{tape.parameter(*value.weight),
                                 ops::reshape(tape.parameter(*value.bias), {1, cfg_.dim})};
  auto value_aug = ops::concat_rows<T>(rows);
  auto mixed = deformable_aggregate(off, attn, value_aug, refs, features, cfg_);
  return output(tape, mixed);
}

template <class T>
std::vector<std::vector<RasterPoint>> DeformableCrossAttention<T>::sampling_locations(
    const Tensor<T>& queries, std::span<const UnitBox> refs) const {
  const std::size_t n = queries.rows(), d = queries.cols();
  const std::size_t samples = cfg_.heads * cfg_.levels * cfg_.points;
  const auto& w = offsets.weight->value.data;
  const auto& b = offsets.bias->value.data;
  std::vector<std::vector<RasterPoint>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < samples; ++s) {
      double ox = b[2 * s], oy = b[2 * s + 1];
      for (std::size_t k = 0; k < d; ++k) {
        ox += queries.data[i * d + k] * w[k * samples * 2 + 2 * s];
        oy += queries.data[i * d + k] * w[k * samples * 2 + 2 * s + 1];
      }
      out[i].push_back({refs[i].cx() + ox * 0.5 * refs[i].width(),
                        refs[i].cy() + oy * 0.5 * refs[i].height()});
    }
  }
  return out;
}

template <class T>
Var<T> deformable_aggregate(Var<T> offsets, Var<T> attn, Var<T> value_aug,
                            std::span<const UnitBox> refs, const FeaturePyramid<T>& features,
                            const DeformAttnConfig& cfg) {
  const std::size_t n = offsets.rows();
  const std::size_t H = cfg.heads, L = cfg.levels, P = cfg.points, d = cfg.dim, dh = d / H;
  const std::size_t S = H * L * P;
  if (offsets.cols() != 2 * S || attn.rows() != n || attn.cols() != S) {
    throw ShapeError("deformable_aggregate: offset/weight layout does not match the config");
  }
  if (refs.size() != n) throw ShapeError("deformable_aggregate: one reference box per query");
  if (features.size() < L) throw ShapeError("deformable_aggregate: too few feature levels");
  const std::size_t C = features[0].shape.at(0);
  const std::size_t A = C + 1;  // channels plus coverage
  if (value_aug.rows() != A || value_aug.cols() != d) {
    throw ShapeError("deformable_aggregate: value matrix must be [C+1, dim]");
  }

  struct Saved {
    std::vector<T> samples;  // [n, S, A]
    std::vector<T> dsx;      // d sample / d offset_x, already chain-ruled
    std::vector<T> dsy;
    std::vector<T> agg;      // [n, H, A]
  };
  auto saved = std::make_shared<Saved>();
  saved->samples.assign(n * S * A, T{0});
  saved->dsx.assign(n * S * A, T{0});
  saved->dsy.assign(n * S * A, T{0});
  saved->agg.assign(n * H * A, T{0});

  const auto ov = offsets.value();
  const auto av = attn.value();
  const auto vv = value_aug.value();
  std::vector<T> px(C), pdx(C), pdy(C), cov(3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& box = refs[i];
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t l = 0; l < L; ++l) {
        const auto& map = features[l];
        const T Hl = static_cast<T>(map.shape[1]), Wl = static_cast<T>(map.shape[2]);
        const T sx = static_cast<T>(0.5 * box.width()) * Wl;   // d raster_x / d offset_x
        const T sy = static_cast<T>(0.5 * box.height()) * Hl;
        for (std::size_t p = 0; p < P; ++p) {
          const std::size_t s = (h * L + l) * P + p;
          const T ox = ov[i * 2 * S + 2 * s], oy = ov[i * 2 * S + 2 * s + 1];
          const T x = static_cast<T>(box.cx()) * Wl - T(0.5) + ox * sx;
          const T y = static_cast<T>(box.cy()) * Hl - T(0.5) + oy * sy;
          bilinear_kernel<T>(map, x, y, px, pdx, pdy, cov);
          T* smp = saved->samples.data() + (i * S + s) * A;
          T* gx = saved->dsx.data() + (i * S + s) * A;
          T* gy = saved->dsy.data() + (i * S + s) * A;
          for (std::size_t c = 0; c < C; ++c) {
            smp[c] = px[c];
            gx[c] = pdx[c] * sx;
            gy[c] = pdy[c] * sy;
          }
          smp[C] = cov[0];
          gx[C] = cov[1] * sx;
          gy[C] = cov[2] * sy;
          const T a = av[i * S + s];
          T* agg = saved->agg.data() + (i * H + h) * A;
          for (std::size_t c = 0; c < A; ++c) agg[c] += a * smp[c];
        }
      }
    }
  }

  std::vector<T> out(n * d, T{0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < H; ++h) {
      const T* agg = saved->agg.data() + (i * H + h) * A;
      for (std::size_t c = 0; c < A; ++c)
        for (std::size_t e = 0; e < dh; ++e) out[i * d + h * dh + e] += agg[c] * vv[c * d + h * dh + e];
    }

  auto& tape = offsets.tape();
  const std::size_t io = offsets.id(), ia = attn.id(), iv = value_aug.id();
  const bool grad = tape.node(io).requires_grad || tape.node(ia).requires_grad ||
                    tape.node(iv).requires_grad;
  return tape.record(
      "deformable_aggregate", {n, d}, std::move(out), grad,
      [=](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& vv = t.node(iv).value;
        const auto& av = t.node(ia).value;
        if (t.node(iv).requires_grad) {
          auto gv = t.grad(iv);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t h = 0; h < H; ++h) {
              const T* agg = saved->agg.data() + (i * H + h) * A;
              for (std::size_t c = 0; c < A; ++c)
                for (std::size_t e = 0; e < dh; ++e)
                  gv[c * d + h * dh + e] += agg[c] * g[i * d + h * dh + e];
            }
        }
        const bool need_a = t.node(ia).requires_grad, need_o = t.node(io).requires_grad;
        if (!need_a && !need_o) return;
        std::vector<T> u(A);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < A; ++c) {
              T acc{0};
              for (std::size_t e = 0; e < dh; ++e) acc += vv[c * d + h * dh + e] * g[i * d + h * dh + e];
              u[c] = acc;
            }
            for (std::size_t lp = 0; lp < L * P; ++lp) {
              const std::size_t s = h * L * P + lp;
              const std::size_t base = (i * S + s) * A;
              if (need_a) {
                T acc{0};
                for (std::size_t c = 0; c < A; ++c) acc += saved->samples[base + c] * u[c];
                t.grad(ia)[i * S + s] += acc;
              }
              if (need_o) {
                T ax{0}, ay{0};
                for (std::size_t c = 0; c < A; ++c) {
                  ax += saved->dsx[base + c] * u[c];
                  ay += saved->dsy[base + c] * u[c];
                }
                const T a = av[i * S + s];
                auto go = t.grad(io);
                go[i * 2 * S + 2 * s] += a * ax;
                go[i * 2 * S + 2 * s + 1] += a * ay;
              }
            }
          }
        }
      });
}

#define CTBG_INSTANTIATE(T)                                                                   \
  template struct Linear<T>;                                                                  \
  template struct LayerNorm<T>;                                                               \
  template struct FeedForward<T>;                                                             \
  template class MultiHeadSelfAttention<T>;                                                   \
  template class DeformableCrossAttention<T>;                                                 \
  template Var<T> deformable_aggregate<T>(Var<T>, Var<T>, Var<T>, std::span<const UnitBox>,   \
                                          const FeaturePyramid<T>&, const DeformAttnConfig&);

CTBG_INSTANTIATE(float)
CTBG_INSTANTIATE(double)
#undef CTBG_INSTANTIATE

}  // namespace ctbg
