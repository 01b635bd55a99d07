// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ctbg/error.hpp"

namespace ctbg::ops {
namespace {

template <class T>
void require_matrix(const Var<T>& x, const char* op) {
  if (x.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + to_string(x.shape()));
  }
}

template <class T>
bool needs_grad(const Var<T>& x) {
  return x.tape().node(x.id()).requires_grad;
}

template <class T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
  return a.tape();
}

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  auto& tape = same_tape(a, b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  std::vector<T> out(n * m, T{0});
  const auto av = a.value();
  const auto bv = b.value();
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      "matmul", {n, m}, std::move(out), needs_grad(a) || needs_grad(b),
      [ia, ib, n, k, m](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        if (t.node(ia).requires_grad) {
          auto ga = t.grad(ia);
          const auto& bv = t.node(ib).value;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              T acc{0};
              for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (t.node(ib).requires_grad) {
          auto gb = t.grad(ib);
          const auto& av = t.node(ia).value;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const T aip = av[i * k + p];
              for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * g[i * m + j];
            }
          }
        }
      });
}

template <class T>
Var<T> matmul_bt(Var<T> a, Var<T> b) {
  require_matrix(a, "matmul_bt");
  require_matrix(b, "matmul_bt");
  auto& tape = same_tape(a, b, "matmul_bt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_bt: " + to_string(a.shape()) + " x T" + to_string(b.shape()));
  }
  std::vector<T> out(n * m);
  const auto av = a.value();
  const auto bv = b.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
      out[i * m + j] = acc;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(
      "matmul_bt", {n, m}, std::move(out), needs_grad(a) || needs_grad(b),
      [ia, ib, n, k, m](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& av = t.node(ia).value;
        const auto& bv = t.node(ib).value;
        if (t.node(ia).requires_grad) {
          auto ga = t.grad(ia);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const T gij = g[i * m + j];
              for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[j * k + p];
            }
        }
        if (t.node(ib).requires_grad) {
          auto gb = t.grad(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
              const T gij = g[i * m + j];
              for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * av[i * k + p];
            }
        }
      });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  require_matrix(x, "linear");
  require_matrix(w, "linear");
  auto& tape = same_tape(x, w, "linear");
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  if (w.rows() != k || bias.value().size() != m) {
    throw ShapeError("linear: x" + to_string(x.shape()) + " w" + to_string(w.shape()) + " b" +
                     to_string(bias.shape()));
  }
  std::vector<T> out(n * m);
  const auto xv = x.value();
  const auto wv = w.value();
  const auto bv = bias.value();
  for (std::size_t i = 0; i < n; ++i) {
    T* orow = out.data() + i * m;
    std::copy(bv.begin(), bv.end(), orow);
    for (std::size_t p = 0; p < k; ++p) {
      const T xip = xv[i * k + p];
      const T* wrow = wv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += xip * wrow[j];
    }
  }
  const std::size_t ix = x.id(), iw = w.id(), ibias = bias.id();
  return tape.record(
      "linear", {n, m}, std::move(out), needs_grad(x) || needs_grad(w) || needs_grad(bias),
      [ix, iw, ibias, n, k, m](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        if (t.node(ix).requires_grad) {
          auto gx = t.grad(ix);
          const auto& wv = t.node(iw).value;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              T acc{0};
              for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * wv[p * m + j];
              gx[i * k + p] += acc;
            }
        }
        if (t.node(iw).requires_grad) {
          auto gw = t.grad(iw);
          const auto& xv = t.node(ix).value;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const T xip = xv[i * k + p];
              for (std::size_t j = 0; j < m; ++j) gw[p * m + j] += xip * g[i * m + j];
            }
        }
        if (t.node(ibias).requires_grad) {
          auto gb = t.grad(ibias);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
        }
      });
}

namespace {

template <class T, class F, class DA, class DB>
Var<T> elementwise(const char* op, Var<T> a, Var<T> b, F f, DA da, DB db) {
  auto& tape = same_tape(a, b, op);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const auto av = a.value();
  const auto bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record(op, a.shape(), std::move(out), needs_grad(a) || needs_grad(b),
                     [ia, ib, da, db](Tape<T>& t, std::size_t self) {
                       const auto& g = t.node(self).grad;
                       const auto& av = t.node(ia).value;
                       const auto& bv = t.node(ib).value;
                       if (t.node(ia).requires_grad) {
                         auto ga = t.grad(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
                       }
                       if (t.node(ib).requires_grad) {
                         auto gb = t.grad(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
                       }
                     });
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return elementwise<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return elementwise<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return elementwise<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T>
Var<T> scale(Var<T> x, T factor) {
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * factor;
  const std::size_t ix = x.id();
  return x.tape().record("scale", x.shape(), std::move(out), needs_grad(x),
                         [ix, factor](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                         });
}

template <class T>
Var<T> relu(Var<T> x) {
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
  const std::size_t ix = x.id();
  return x.tape().record("relu", x.shape(), std::move(out), needs_grad(x),
                         [ix](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           const auto& xv = t.node(ix).value;
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (xv[i] > T{0}) gx[i] += g[i];
                         });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  require_matrix(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (gain.value().size() != d || bias.value().size() != d) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  const auto xv = x.value();
  const auto gv = gain.value();
  const auto bv = bias.value();
  std::vector<T> out(n * d);
  // normalized activations and inverse std are needed again in backward
  auto xhat = std::make_shared<std::vector<T>>(n * d);
  auto inv_std = std::make_shared<std::vector<T>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += xv[i * d + j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) {
      const T c = xv[i * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<T>(d);
    const T is = T{1} / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xv[i * d + j] - mu) * is;
      (*xhat)[i * d + j] = h;
      out[i * d + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      "layer_norm", {n, d}, std::move(out),
      needs_grad(x) || needs_grad(gain) || needs_grad(bias),
      [ix, ig, ib, n, d, xhat, inv_std](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& gv = t.node(ig).value;
        if (t.node(ig).requires_grad) {
          auto gg = t.grad(ig);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * (*xhat)[i * d + j];
        }
        if (t.node(ib).requires_grad) {
          auto gb = t.grad(ib);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        if (t.node(ix).requires_grad) {
          auto gx = t.grad(ix);
          const T inv_d = T{1} / static_cast<T>(d);
          for (std::size_t i = 0; i < n; ++i) {
            T mean_dh{0}, mean_dh_h{0};
            for (std::size_t j = 0; j < d; ++j) {
              const T dh = g[i * d + j] * gv[j];
              mean_dh += dh;
              mean_dh_h += dh * (*xhat)[i * d + j];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const T dh = g[i * d + j] * gv[j];
              gx[i * d + j] += (*inv_std)[i] * (dh - mean_dh - (*xhat)[i * d + j] * mean_dh_h);
            }
          }
        }
      });
}

template <class T>
Var<T> softmax_rows(Var<T> x) {
  require_matrix(x, "softmax_rows");
  const std::size_t n = x.rows(), c = x.cols();
  const auto xv = x.value();
  std::vector<T> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    if (!std::isfinite(mx)) throw NumericError("softmax_rows: row without a finite entry");
    T z{0};
    for (std::size_t j = 0; j < c; ++j) {
      const T e = std::isinf(xv[i * c + j]) ? T{0} : std::exp(xv[i * c + j] - mx);
      out[i * c + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  const std::size_t ix = x.id();
  return x.tape().record("softmax_rows", {n, c}, std::move(out), needs_grad(x),
                         [ix, n, c](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           const auto& y = t.node(self).value;
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < n; ++i) {
                             T dot{0};
                             for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                             for (std::size_t j = 0; j < c; ++j)
                               gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                           }
                         });
}

template <class T>
Var<T> reshape(Var<T> x, Shape shape) {
  if (numel(shape) != x.value().size()) {
    throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  }
  const auto xv = x.value();
  const std::size_t ix = x.id();
  return x.tape().record("reshape", std::move(shape), std::vector<T>(xv.begin(), xv.end()),
                         needs_grad(x), [ix](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                         }, x.tape().node(ix).allow_neg_inf);
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  bool grad = false;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) throw ShapeError("concat_cols: row count mismatch");
    same_tape(parts[0], p, "concat_cols");
    total += p.cols();
    grad = grad || needs_grad(p);
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  std::vector<T> out(n * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto pv = p.value();
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(pv.data() + i * w, w, out.data() + i * total + off);
    off += w;
  }
  return parts[0].tape().record(
      "concat_cols", {n, total}, std::move(out), grad,
      [ids, widths, n, total](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        std::size_t off = 0;
        for (std::size_t q = 0; q < ids.size(); ++q) {
          const std::size_t w = widths[q];
          if (t.node(ids[q]).requires_grad) {
            auto gp = t.grad(ids[q]);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * total + off + j];
          }
          off += w;
        }
      });
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  bool grad = false;
  std::vector<std::size_t> ids, sizes;
  std::vector<T> out;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) throw ShapeError("concat_rows: column count mismatch");
    same_tape(parts[0], p, "concat_rows");
    total += p.rows();
    grad = grad || needs_grad(p);
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
    const auto pv = p.value();
    out.insert(out.end(), pv.begin(), pv.end());
  }
  return parts[0].tape().record("concat_rows", {total, c}, std::move(out), grad,
                                [ids, sizes](Tape<T>& t, std::size_t self) {
                                  const auto& g = t.node(self).grad;
                                  std::size_t off = 0;
                                  for (std::size_t q = 0; q < ids.size(); ++q) {
                                    if (t.node(ids[q]).requires_grad && sizes[q] > 0) {
                                      auto gp = t.grad(ids[q]);
                                      for (std::size_t i = 0; i < sizes[q]; ++i) gp[i] += g[off + i];
                                    }
                                    off += sizes[q];
                                  }
                                });
}

template <class T>
Var<T> gather_rows(Var<T> x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.rows(), c = x.cols();
  const auto xv = x.value();
  std::vector<T> out(rows.size() * c);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("gather_rows: row index out of range");
    std::copy_n(xv.data() + rows[r] * c, c, out.data() + r * c);
  }
  const std::size_t ix = x.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return x.tape().record("gather_rows", {rows.size(), c}, std::move(out), needs_grad(x),
                         [ix, idx = std::move(idx), c](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto gx = t.grad(ix);
                           for (std::size_t r = 0; r < idx.size(); ++r)
                             for (std::size_t j = 0; j < c; ++j) gx[idx[r] * c + j] += g[r * c + j];
                         });
}

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t n = x.rows(), c = x.cols();
  if (start + count > c) throw ShapeError("slice_cols: range exceeds column count");
  const auto xv = x.value();
  std::vector<T> out(n * count);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xv.data() + i * c + start, count, out.data() + i * count);
  const std::size_t ix = x.id();
  return x.tape().record("slice_cols", {n, count}, std::move(out), needs_grad(x),
                         [ix, n, c, start, count](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto gx = t.grad(ix);
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t j = 0; j < count; ++j)
                               gx[i * c + start + j] += g[i * count + j];
                         });
}

template <class T>
Var<T> add_mask(Var<T> x, std::span<const T> additive) {
  const auto xv = x.value();
  if (additive.size() != xv.size()) throw ShapeError("add_mask: mask size mismatch");
  std::vector<T> out(xv.size());
  std::vector<bool> open(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T m = additive[i];
    if (std::isnan(m) || (std::isinf(m) && m > 0)) throw NumericError("add_mask: invalid mask entry");
    open[i] = std::isfinite(m);
    out[i] = xv[i] + m;
  }
  const std::size_t ix = x.id();
  return x.tape().record(
      "add_mask", x.shape(), std::move(out), needs_grad(x),
      [ix, open = std::move(open)](Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        auto gx = t.grad(ix);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (open[i]) gx[i] += g[i];
      },
      true);
}

template <class T>
Var<T> sum(Var<T> x) {
  T acc{0};
  for (const T v : x.value()) acc += v;
  const std::size_t ix = x.id();
  return x.tape().record("sum", {}, {acc}, needs_grad(x), [ix](Tape<T>& t, std::size_t self) {
    const T g = t.node(self).grad[0];
    for (auto& v : t.grad(ix)) v += g;
  });
}

template <class T>
Var<T> mean(Var<T> x) {
  const std::size_t count = x.value().size();
  if (count == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), T{1} / static_cast<T>(count));
}

template <class T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::size_t> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy: one label per row required");
  if (n == 0) throw ShapeError("softmax_cross_entropy: no rows");
  const auto xv = logits.value();
  auto probs = std::make_shared<std::vector<T>>(n * c);
  T loss{0};
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) throw ConfigError("softmax_cross_entropy: label out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    if (!std::isfinite(xv[i * c + labels[i]])) {
      throw NumericError("softmax_cross_entropy: label column is masked");
    }
    T z{0};
    for (std::size_t j = 0; j < c; ++j) {
      const T e = std::isinf(xv[i * c + j]) ? T{0} : std::exp(xv[i * c + j] - mx);
      (*probs)[i * c + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= z;
    loss += std::log(z) + mx - xv[i * c + labels[i]];
  }
  loss /= static_cast<T>(n);
  const std::size_t ix = logits.id();
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return logits.tape().record(
      "softmax_cross_entropy", {}, {loss}, needs_grad(logits),
      [ix, n, c, probs, lab = std::move(lab)](Tape<T>& t, std::size_t self) {
        const T g = t.node(self).grad[0] / static_cast<T>(n);
        auto gx = t.grad(ix);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g * (*probs)[i * c + j];
          gx[i * c + lab[i]] -= g;
        }
      });
}

template <class T>
Var<T> bce_with_logits(Var<T> logits, std::span<const T> labels) {
  const auto zv = logits.value();
  const std::size_t m = zv.size();
  if (labels.size() != m) throw ShapeError("bce_with_logits: label count mismatch");
  if (m == 0) return logits.tape().record("bce_with_logits", {}, {T{0}}, false, nullptr);
  T loss{0};
  for (std::size_t i = 0; i < m; ++i) {
    const T z = zv[i], y = labels[i];
    loss += std::max(z, T{0}) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<T>(m);
  const std::size_t ix = logits.id();
  std::vector<T> lab(labels.begin(), labels.end());
  return logits.tape().record(
      "bce_with_logits", {}, {loss}, needs_grad(logits),
      [ix, m, lab = std::move(lab)](Tape<T>& t, std::size_t self) {
        const T g = t.node(self).grad[0] / static_cast<T>(m);
        const auto& zv = t.node(ix).value;
        auto gx = t.grad(ix);
        for (std::size_t i = 0; i < m; ++i) {
          const T s = T{1} / (T{1} + std::exp(-zv[i]));
          gx[i] += g * (s - lab[i]);
        }
      });
}

#define CTBG_INSTANTIATE(T)                                                         \
  template Var<T> matmul<T>(Var<T>, Var<T>);                                        \
  template Var<T> matmul_bt<T>(Var<T>, Var<T>);                                     \
  template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                \
  template Var<T> add<T>(Var<T>, Var<T>);                                           \
  template Var<T> sub<T>(Var<T>, Var<T>);                                           \
  template Var<T> mul<T>(Var<T>, Var<T>);                                           \
  template Var<T> scale<T>(Var<T>, T);                                              \
  template Var<T> relu<T>(Var<T>);                                                  \
  template Var<T> layer_norm<T>(Var<T>, Var<T>, Var<T>, T);                         \
  template Var<T> softmax_rows<T>(Var<T>);                                          \
  template Var<T> reshape<T>(Var<T>, Shape);                                        \
  template Var<T> concat_cols<T>(std::span<const Var<T>>);                          \
  template Var<T> concat_rows<T>(std::span<const Var<T>>);                          \
  template Var<T> gather_rows<T>(Var<T>, std::span<const std::size_t>);             \
  template Var<T> slice_cols<T>(Var<T>, std::size_t, std::size_t);                  \
  template Var<T> add_mask<T>(Var<T>, std::span<const T>);                          \
  template Var<T> sum<T>(Var<T>);                                                   \
  template Var<T> mean<T>(Var<T>);                                                  \
  template Var<T> softmax_cross_entropy<T>(Var<T>, std::span<const std::size_t>);   \
  template Var<T> bce_with_logits<T>(Var<T>, std::span<const T>);

CTBG_INSTANTIATE(float)
CTBG_INSTANTIATE(double)
#undef CTBG_INSTANTIATE

}  // namespace ctbg::ops
