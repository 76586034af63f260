#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/graph.hpp"
#include "diffimpute/core/rng.hpp"
#include "diffimpute/core/tensor.hpp"

/// Differentiable tensor operations recorded on a Graph.
///
/// Each op computes its forward value eagerly and, when any input needs a
/// gradient, registers a closure that accumulates into the input gradients.
namespace diffimpute::ops {

namespace detail {

inline std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
    std::size_t n = 1;
    for (std::size_t i = from; i < to; ++i) n *= s[i];
    return n;
}

template <class Real>
Real sigmoid(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

} // namespace detail

// ---------------------------------------------------------------------------
// element-wise

template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b) {
    Graph<Real>& g = *a.graph;
    require_same_shape(a.value(), b.value(), "add");
    Tensor<Real> out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < bv.size(); ++i) out[i] += bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return g.push(std::move(out), g.any_requires_grad({a, b}),
                  [ia, ib](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      for (std::size_t id : {ia, ib}) {
                          if (!g.wants(id)) continue;
                          auto& dst = g.grad_slot(id).storage();
                          for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i];
                      }
                  },
                  "add");
}

template <class Real>
Var<Real> sub(Var<Real> a, Var<Real> b) {
    Graph<Real>& g = *a.graph;
    require_same_shape(a.value(), b.value(), "sub");
    Tensor<Real> out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < bv.size(); ++i) out[i] -= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return g.push(std::move(out), g.any_requires_grad({a, b}),
                  [ia, ib](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      if (g.wants(ia)) {
                          auto& dst = g.grad_slot(ia).storage();
                          for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i];
                      }
                      if (g.wants(ib)) {
                          auto& dst = g.grad_slot(ib).storage();
                          for (std::size_t i = 0; i < go.size(); ++i) dst[i] -= go[i];
                      }
                  },
                  "sub");
}

template <class Real>
Var<Real> mul(Var<Real> a, Var<Real> b) {
    Graph<Real>& g = *a.graph;
    require_same_shape(a.value(), b.value(), "mul");
    Tensor<Real> out = a.value();
    const auto& bv = b.value().storage();
    for (std::size_t i = 0; i < bv.size(); ++i) out[i] *= bv[i];
    const std::size_t ia = a.id, ib = b.id;
    return g.push(std::move(out), g.any_requires_grad({a, b}),
                  [ia, ib](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      const auto& av = g.value_at(ia).storage();
                      const auto& bv = g.value_at(ib).storage();
                      if (g.wants(ia)) {
                          auto& dst = g.grad_slot(ia).storage();
                          for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i] * bv[i];
                      }
                      if (g.wants(ib)) {
                          auto& dst = g.grad_slot(ib).storage();
                          for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i] * av[i];
                      }
                  },
                  "mul");
}

template <class Real>
Var<Real> scale(Var<Real> a, Real c) {
    Graph<Real>& g = *a.graph;
    Tensor<Real> out = a.value();
    for (auto& v : out.storage()) v *= c;
    const std::size_t ia = a.id;
    return g.push(std::move(out), g.any_requires_grad({a}),
                  [ia, c](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      auto& dst = g.grad_slot(ia).storage();
                      for (std::size_t i = 0; i < go.size(); ++i) dst[i] += c * go[i];
                  },
                  "scale");
}

namespace detail {

template <class Real, class F, class DF>
Var<Real> unary(Var<Real> a, F f, DF df, const char* name) {
    Graph<Real>& g = *a.graph;
    Tensor<Real> out = a.value();
    for (auto& v : out.storage()) v = f(v);
    const std::size_t ia = a.id;
    return g.push(std::move(out), g.any_requires_grad({a}),
                  [ia, df](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      const auto& x = g.value_at(ia).storage();
                      auto& dst = g.grad_slot(ia).storage();
                      for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i] * df(x[i]);
                  },
                  name);
}

} // namespace detail

template <class Real>
Var<Real> relu(Var<Real> a) {
    return detail::unary(
        a, [](Real x) { return x > Real(0) ? x : Real(0); },
        [](Real x) { return x > Real(0) ? Real(1) : Real(0); }, "relu");
}

/// Exact GELU, x * Phi(x).
template <class Real>
Var<Real> gelu(Var<Real> a) {
    return detail::unary(
        a, [](Real x) { return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>)); },
        [](Real x) {
            const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
            const Real pdf = std::exp(Real(-0.5) * x * x) / std::sqrt(Real(2) * std::numbers::pi_v<Real>);
            return cdf + x * pdf;
        },
        "gelu");
}

template <class Real>
Var<Real> silu(Var<Real> a) {
    return detail::unary(
        a, [](Real x) { return x * detail::sigmoid(x); },
        [](Real x) {
            const Real s = detail::sigmoid(x);
            return s * (Real(1) + x * (Real(1) - s));
        },
        "silu");
}

/// Inverted dropout: keeps each entry with probability 1-p and scales kept
/// entries by 1/(1-p). Identity when not training or p == 0.
template <class Real>
Var<Real> dropout(Var<Real> a, double p, bool training, Rng* rng) {
    if (!training || p <= 0.0) return a;
    if (p >= 1.0) throw InputError("dropout rate must be < 1");
    if (rng == nullptr) throw InvariantError("training-mode dropout needs an Rng");
    Graph<Real>& g = *a.graph;
    const Real keep_scale = Real(1.0 / (1.0 - p));
    std::vector<Real> mask(a.value().size());
    for (auto& m : mask) m = rng->bernoulli(1.0 - p) ? keep_scale : Real(0);
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
    const std::size_t ia = a.id;
    return g.push(std::move(out), g.any_requires_grad({a}),
                  [ia, mask = std::move(mask)](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      auto& dst = g.grad_slot(ia).storage();
                      for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i] * mask[i];
                  },
                  "dropout");
}

// ---------------------------------------------------------------------------
// linear algebra

namespace detail {

/// out[rows, n] = bias + x[rows, in] * w[in, n], four rows at a time.
template <class Real>
void matmul_acc(const Real* __restrict x, const Real* __restrict w, const Real* __restrict bias, Real* __restrict out,
                std::size_t rows, std::size_t in, std::size_t n) {
    for (std::size_t m = 0; m < rows; ++m)
        for (std::size_t o = 0; o < n; ++o) out[m * n + o] = bias ? bias[o] : Real(0);
    std::size_t m = 0;
    for (; m + 4 <= rows; m += 4) {
        Real* __restrict o0 = out + m * n;
        Real* __restrict o1 = o0 + n;
        Real* __restrict o2 = o1 + n;
        Real* __restrict o3 = o2 + n;
        const Real* x0 = x + m * in;
        for (std::size_t i = 0; i < in; ++i) {
            const Real a0 = x0[i], a1 = x0[in + i], a2 = x0[2 * in + i], a3 = x0[3 * in + i];
            const Real* __restrict wr = w + i * n;
            for (std::size_t o = 0; o < n; ++o) {
                const Real wv = wr[o];
                o0[o] += a0 * wv;
                o1[o] += a1 * wv;
                o2[o] += a2 * wv;
                o3[o] += a3 * wv;
            }
        }
    }
    for (; m < rows; ++m) {
        Real* __restrict orow = out + m * n;
        for (std::size_t i = 0; i < in; ++i) {
            const Real a = x[m * in + i];
            const Real* __restrict wr = w + i * n;
            for (std::size_t o = 0; o < n; ++o) orow[o] += a * wr[o];
        }
    }
}

} // namespace detail

/// y = x W + b over the last axis of x. W is [in, out]; b is [out].
template <class Real>
Var<Real> linear(Var<Real> x, Var<Real> w, std::type_identity_t<std::optional<Var<Real>>> b = std::nullopt) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (ws.size() != 2 || xs.back() != ws[0])
        throw ShapeError("linear: input " + shape_str(xs) + " incompatible with weight " + shape_str(ws));
    const std::size_t in = ws[0], outd = ws[1], rows = x.value().size() / in;
    if (b && (b->value().size() != outd)) throw ShapeError("linear: bias length mismatch");
    Shape os = xs;
    os.back() = outd;
    Tensor<Real> out(os);
    detail::matmul_acc(x.value().data().data(), w.value().data().data(), b ? b->value().data().data() : nullptr,
                       out.data().data(), rows, in, outd);
    const std::size_t ix = x.id, iw = w.id;
    const std::optional<std::size_t> ib = b ? std::optional<std::size_t>(b->id) : std::nullopt;
    const bool needs = b ? g.any_requires_grad({x, w, *b}) : g.any_requires_grad({x, w});
    return g.push(std::move(out), needs,
                  [ix, iw, ib, in, outd, rows](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* xv = g.value_at(ix).data().data();
                      const Real* wv = g.value_at(iw).data().data();
                      if (g.wants(ix)) {
                          Real* gx = g.grad_slot(ix).data().data();
                          for (std::size_t m = 0; m < rows; ++m)
                              for (std::size_t i = 0; i < in; ++i) {
                                  Real acc = 0;
                                  const Real* wrow = wv + i * outd;
                                  const Real* grow = go + m * outd;
                                  for (std::size_t o = 0; o < outd; ++o) acc += grow[o] * wrow[o];
                                  gx[m * in + i] += acc;
                              }
                      }
                      if (g.wants(iw)) {
                          Real* gw = g.grad_slot(iw).data().data();
                          for (std::size_t m = 0; m < rows; ++m)
                              for (std::size_t i = 0; i < in; ++i) {
                                  const Real xi = xv[m * in + i];
                                  Real* gwrow = gw + i * outd;
                                  const Real* grow = go + m * outd;
                                  for (std::size_t o = 0; o < outd; ++o) gwrow[o] += xi * grow[o];
                              }
                      }
                      if (ib && g.wants(*ib)) {
                          Real* gb = g.grad_slot(*ib).data().data();
                          for (std::size_t m = 0; m < rows; ++m)
                              for (std::size_t o = 0; o < outd; ++o) gb[o] += go[m * outd + o];
                      }
                  },
                  "linear");
}

// ---------------------------------------------------------------------------
// time conditioning

/// FiLM modulation out = h * (scale + 1) + shift.
///
/// `emb` is [B, 2C] holding (scale, shift) per row; `channel_axis` names the
/// axis of `h` that has length C (h's axis 0 is the batch). Every other axis
/// of h is broadcast over.
template <class Real>
Var<Real> film(Var<Real> h, Var<Real> emb, std::size_t channel_axis) {
    Graph<Real>& g = *h.graph;
    const Shape& hs = h.shape();
    if (channel_axis == 0 || channel_axis >= hs.size()) throw ShapeError("film: bad channel axis");
    const std::size_t batch = hs[0], channels = hs[channel_axis];
    const std::size_t outer = detail::prod(hs, 1, channel_axis);
    const std::size_t inner = detail::prod(hs, channel_axis + 1, hs.size());
    const Shape& es = emb.shape();
    if (es.size() != 2 || es[0] != batch || es[1] != 2 * channels)
        throw ShapeError("film: embedding " + shape_str(es) + " does not match features " + shape_str(hs));
    Tensor<Real> out(hs);
    const Real* hv = h.value().data().data();
    const Real* ev = emb.value().data().data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t a = 0; a < outer; ++a)
            for (std::size_t c = 0; c < channels; ++c) {
                const Real sc = ev[b * 2 * channels + c] + Real(1);
                const Real sh = ev[b * 2 * channels + channels + c];
                const std::size_t base = ((b * outer + a) * channels + c) * inner;
                for (std::size_t d = 0; d < inner; ++d) out[base + d] = hv[base + d] * sc + sh;
            }
    const std::size_t ih = h.id, ie = emb.id;
    return g.push(std::move(out), g.any_requires_grad({h, emb}),
                  [ih, ie, batch, outer, channels, inner](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* hv = g.value_at(ih).data().data();
                      const Real* ev = g.value_at(ie).data().data();
                      Real* gh = g.wants(ih) ? g.grad_slot(ih).data().data() : nullptr;
                      Real* ge = g.wants(ie) ? g.grad_slot(ie).data().data() : nullptr;
                      for (std::size_t b = 0; b < batch; ++b)
                          for (std::size_t a = 0; a < outer; ++a)
                              for (std::size_t c = 0; c < channels; ++c) {
                                  const Real sc = ev[b * 2 * channels + c] + Real(1);
                                  const std::size_t base = ((b * outer + a) * channels + c) * inner;
                                  Real gsc = 0, gsh = 0;
                                  for (std::size_t d = 0; d < inner; ++d) {
                                      const Real gv = go[base + d];
                                      if (gh) gh[base + d] += gv * sc;
                                      gsc += gv * hv[base + d];
                                      gsh += gv;
                                  }
                                  if (ge) {
                                      ge[b * 2 * channels + c] += gsc;
                                      ge[b * 2 * channels + channels + c] += gsh;
                                  }
                              }
                  },
                  "film");
}

/// ReGLU over the last axis: split [..., 2h] into (a, gate), return a * relu(gate).
template <class Real>
Var<Real> reglu(Var<Real> x) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    if (xs.back() % 2 != 0) throw ShapeError("reglu: last axis must be even");
    const std::size_t half = xs.back() / 2, rows = x.value().size() / xs.back();
    Shape os = xs;
    os.back() = half;
    Tensor<Real> out(os);
    const Real* xv = x.value().data().data();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < half; ++j) {
            const Real gate = xv[r * 2 * half + half + j];
            out[r * half + j] = xv[r * 2 * half + j] * (gate > 0 ? gate : Real(0));
        }
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix, rows, half](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* xv = g.value_at(ix).data().data();
                      Real* gx = g.grad_slot(ix).data().data();
                      for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t j = 0; j < half; ++j) {
                              const Real a = xv[r * 2 * half + j];
                              const Real gate = xv[r * 2 * half + half + j];
                              const Real gv = go[r * half + j];
                              if (gate > 0) {
                                  gx[r * 2 * half + j] += gv * gate;
                                  gx[r * 2 * half + half + j] += gv * a;
                              }
                          }
                  },
                  "reglu");
}

// ---------------------------------------------------------------------------
// normalization

/// State a batch-norm layer carries between calls.
template <class Real>
struct BatchNormBuffers {
    Tensor<Real>* running_mean = nullptr;
    Tensor<Real>* running_var = nullptr;
    double momentum = 0.1;
    double eps = 1e-5;
};

/// 1-D batch normalization over [B, C]. Training mode normalizes with batch
/// statistics (biased variance) and updates the running estimates (unbiased
/// variance); eval mode uses the running estimates.
template <class Real>
Var<Real> batch_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, BatchNormBuffers<Real> buf, bool training) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    if (xs.size() != 2) throw ShapeError("batch_norm expects [B, C]");
    const std::size_t batch = xs[0], ch = xs[1];
    const Real eps = Real(buf.eps);
    const Real* xv = x.value().data().data();
    const Real* gm = gamma.value().data().data();
    const Real* bt = beta.value().data().data();
    Tensor<Real> out(xs);
    std::vector<Real> xhat(batch * ch), invstd(ch);
    if (training) {
        if (batch < 2)
            throw InputError("batch_norm in training mode needs batch size >= 2 (got " + std::to_string(batch) + ")");
        for (std::size_t c = 0; c < ch; ++c) {
            Real mean = 0;
            for (std::size_t b = 0; b < batch; ++b) mean += xv[b * ch + c];
            mean /= Real(batch);
            Real var = 0;
            for (std::size_t b = 0; b < batch; ++b) {
                const Real d = xv[b * ch + c] - mean;
                var += d * d;
            }
            const Real biased = var / Real(batch);
            invstd[c] = Real(1) / std::sqrt(biased + eps);
            for (std::size_t b = 0; b < batch; ++b) {
                xhat[b * ch + c] = (xv[b * ch + c] - mean) * invstd[c];
                out[b * ch + c] = xhat[b * ch + c] * gm[c] + bt[c];
            }
            if (buf.running_mean) {
                const Real mom = Real(buf.momentum);
                (*buf.running_mean)[c] = (Real(1) - mom) * (*buf.running_mean)[c] + mom * mean;
                (*buf.running_var)[c] =
                    (Real(1) - mom) * (*buf.running_var)[c] + mom * var / Real(batch - 1);
            }
        }
    } else {
        if (!buf.running_mean) throw InvariantError("batch_norm eval mode needs running statistics");
        for (std::size_t c = 0; c < ch; ++c) {
            invstd[c] = Real(1) / std::sqrt((*buf.running_var)[c] + eps);
            const Real mean = (*buf.running_mean)[c];
            for (std::size_t b = 0; b < batch; ++b) {
                xhat[b * ch + c] = (xv[b * ch + c] - mean) * invstd[c];
                out[b * ch + c] = xhat[b * ch + c] * gm[c] + bt[c];
            }
        }
    }
    const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
    return g.push(
        std::move(out), g.any_requires_grad({x, gamma, beta}),
        [ix, ig, ib, batch, ch, training, xhat = std::move(xhat), invstd = std::move(invstd)](Graph<Real>& g,
                                                                                           std::size_t self) {
            const Real* go = g.out_grad(self).data().data();
            const Real* gm = g.value_at(ig).data().data();
            if (g.wants(ig) || g.wants(ib)) {
                Real* ggm = g.wants(ig) ? g.grad_slot(ig).data().data() : nullptr;
                Real* gbt = g.wants(ib) ? g.grad_slot(ib).data().data() : nullptr;
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t c = 0; c < ch; ++c) {
                        if (ggm) ggm[c] += go[b * ch + c] * xhat[b * ch + c];
                        if (gbt) gbt[c] += go[b * ch + c];
                    }
            }
            if (!g.wants(ix)) return;
            Real* gx = g.grad_slot(ix).data().data();
            for (std::size_t c = 0; c < ch; ++c) {
                if (!training) {
                    for (std::size_t b = 0; b < batch; ++b) gx[b * ch + c] += go[b * ch + c] * gm[c] * invstd[c];
                    continue;
                }
                Real sum_g = 0, sum_gx = 0;
                for (std::size_t b = 0; b < batch; ++b) {
                    const Real gy = go[b * ch + c] * gm[c];
                    sum_g += gy;
                    sum_gx += gy * xhat[b * ch + c];
                }
                const Real n = Real(batch);
                for (std::size_t b = 0; b < batch; ++b) {
                    const Real gy = go[b * ch + c] * gm[c];
                    gx[b * ch + c] += invstd[c] / n * (n * gy - sum_g - xhat[b * ch + c] * sum_gx);
                }
            }
        },
        "batch_norm");
}

namespace detail {

/// Normalizes `groups` contiguous runs of `group_len` values, each run then
/// affinely transformed with per-element gamma/beta indexed by `affine_index`.
template <class Real, class AffineIndex>
Var<Real> grouped_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, std::size_t groups, std::size_t group_len,
                       AffineIndex affine_index, Real eps, const char* name) {
    Graph<Real>& g = *x.graph;
    const Real* xv = x.value().data().data();
    const Real* gm = gamma.value().data().data();
    const Real* bt = beta.value().data().data();
    Tensor<Real> out(x.shape());
    std::vector<Real> xhat(x.value().size()), invstd(groups);
    for (std::size_t r = 0; r < groups; ++r) {
        const std::size_t base = r * group_len;
        Real mean = 0;
        for (std::size_t j = 0; j < group_len; ++j) mean += xv[base + j];
        mean /= Real(group_len);
        Real var = 0;
        for (std::size_t j = 0; j < group_len; ++j) {
            const Real d = xv[base + j] - mean;
            var += d * d;
        }
        invstd[r] = Real(1) / std::sqrt(var / Real(group_len) + eps);
        for (std::size_t j = 0; j < group_len; ++j) {
            const std::size_t a = affine_index(base + j);
            xhat[base + j] = (xv[base + j] - mean) * invstd[r];
            out[base + j] = xhat[base + j] * gm[a] + bt[a];
        }
    }
    const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
    return g.push(std::move(out), g.any_requires_grad({x, gamma, beta}),
                  [ix, ig, ib, groups, group_len, affine_index, xhat = std::move(xhat),
                   invstd = std::move(invstd)](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* gm = g.value_at(ig).data().data();
                      Real* ggm = g.wants(ig) ? g.grad_slot(ig).data().data() : nullptr;
                      Real* gbt = g.wants(ib) ? g.grad_slot(ib).data().data() : nullptr;
                      Real* gx = g.wants(ix) ? g.grad_slot(ix).data().data() : nullptr;
                      const Real n = Real(group_len);
                      for (std::size_t r = 0; r < groups; ++r) {
                          const std::size_t base = r * group_len;
                          Real sum_g = 0, sum_gx = 0;
                          for (std::size_t j = 0; j < group_len; ++j) {
                              const std::size_t a = affine_index(base + j);
                              if (ggm) ggm[a] += go[base + j] * xhat[base + j];
                              if (gbt) gbt[a] += go[base + j];
                              const Real gy = go[base + j] * gm[a];
                              sum_g += gy;
                              sum_gx += gy * xhat[base + j];
                          }
                          if (!gx) continue;
                          for (std::size_t j = 0; j < group_len; ++j) {
                              const Real gy = go[base + j] * gm[affine_index(base + j)];
                              gx[base + j] += invstd[r] / n * (n * gy - sum_g - xhat[base + j] * sum_gx);
                          }
                      }
                  },
                  name);
}

} // namespace detail

/// Layer normalization over the last axis with per-feature gamma/beta.
template <class Real>
Var<Real> layer_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, Real eps = Real(1e-5)) {
    const std::size_t c = x.shape().back();
    if (gamma.value().size() != c || beta.value().size() != c) throw ShapeError("layer_norm: affine size mismatch");
    return detail::grouped_norm(
        x, gamma, beta, x.value().size() / c, c, [c](std::size_t i) { return i % c; }, eps, "layer_norm");
}

/// Group normalization over [B, C, L] with `groups` channel groups and per-channel affine.
template <class Real>
Var<Real> group_norm(Var<Real> x, Var<Real> gamma, Var<Real> beta, std::size_t groups, Real eps = Real(1e-5)) {
    const Shape& xs = x.shape();
    if (xs.size() != 3) throw ShapeError("group_norm expects [B, C, L]");
    const std::size_t batch = xs[0], ch = xs[1], len = xs[2];
    if (groups == 0 || ch % groups != 0) throw ShapeError("group_norm: channels not divisible by groups");
    if (gamma.value().size() != ch || beta.value().size() != ch) throw ShapeError("group_norm: affine size mismatch");
    return detail::grouped_norm(
        x, gamma, beta, batch * groups, (ch / groups) * len,
        [ch, len](std::size_t i) { return (i / len) % ch; }, eps, "group_norm");
}

// ---------------------------------------------------------------------------
// attention and convolution

/// Scaled dot-product attention with `heads` heads over q, k, v of shape
/// [B, T, d]. Dropout with rate `p` is applied to the attention weights.
template <class Real>
Var<Real> attention(Var<Real> q, Var<Real> k, Var<Real> v, std::size_t heads, double p, bool training,
                    Rng* rng) {
    Graph<Real>& g = *q.graph;
    const Shape& qs = q.shape();
    if (qs.size() != 3 || k.shape() != qs || v.shape() != qs) throw ShapeError("attention expects equal [B, T, d]");
    const std::size_t batch = qs[0], tokens = qs[1], d = qs[2];
    if (heads == 0 || d % heads != 0) throw ShapeError("attention: width not divisible by head count");
    const std::size_t dh = d / heads;
    const Real inv_scale = Real(1) / std::sqrt(Real(dh));
    const bool drop = training && p > 0.0;
    if (drop && rng == nullptr) throw InvariantError("training-mode attention dropout needs an Rng");
    const Real keep_scale = drop ? Real(1.0 / (1.0 - p)) : Real(1);

    const Real* qv = q.value().data().data();
    const Real* kv = k.value().data().data();
    const Real* vv = v.value().data().data();
    // probs[b][h][i][j]; mask holds the dropout multiplier per weight
    std::vector<Real> probs(batch * heads * tokens * tokens);
    std::vector<Real> mask(drop ? probs.size() : 0);
    Tensor<Real> out(qs);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h) {
            Real* P = probs.data() + (b * heads + h) * tokens * tokens;
            for (std::size_t i = 0; i < tokens; ++i) {
                Real mx = -std::numeric_limits<Real>::infinity();
                for (std::size_t j = 0; j < tokens; ++j) {
                    Real s = 0;
                    for (std::size_t e = 0; e < dh; ++e)
                        s += qv[(b * tokens + i) * d + h * dh + e] * kv[(b * tokens + j) * d + h * dh + e];
                    P[i * tokens + j] = s * inv_scale;
                    mx = std::max(mx, P[i * tokens + j]);
                }
                Real z = 0;
                for (std::size_t j = 0; j < tokens; ++j) {
                    P[i * tokens + j] = std::exp(P[i * tokens + j] - mx);
                    z += P[i * tokens + j];
                }
                for (std::size_t j = 0; j < tokens; ++j) P[i * tokens + j] /= z;
                for (std::size_t j = 0; j < tokens; ++j) {
                    Real w = P[i * tokens + j];
                    if (drop) {
                        Real& m = mask[(b * heads + h) * tokens * tokens + i * tokens + j];
                        m = rng->bernoulli(1.0 - p) ? keep_scale : Real(0);
                        w *= m;
                    }
                    if (w == Real(0)) continue;
                    for (std::size_t e = 0; e < dh; ++e)
                        out[(b * tokens + i) * d + h * dh + e] += w * vv[(b * tokens + j) * d + h * dh + e];
                }
            }
        }
    const std::size_t iq = q.id, ik = k.id, iv = v.id;
    return g.push(
        std::move(out), g.any_requires_grad({q, k, v}),
        [iq, ik, iv, batch, tokens, d, heads, dh, inv_scale, probs = std::move(probs),
         mask = std::move(mask)](Graph<Real>& g, std::size_t self) {
            const Real* go = g.out_grad(self).data().data();
            const Real* qv = g.value_at(iq).data().data();
            const Real* kv = g.value_at(ik).data().data();
            const Real* vv = g.value_at(iv).data().data();
            Real* gq = g.wants(iq) ? g.grad_slot(iq).data().data() : nullptr;
            Real* gk = g.wants(ik) ? g.grad_slot(ik).data().data() : nullptr;
            Real* gv = g.wants(iv) ? g.grad_slot(iv).data().data() : nullptr;
            const bool drop = !mask.empty();
            std::vector<Real> gp(tokens);
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t off = (b * heads + h) * tokens * tokens;
                    const Real* P = probs.data() + off;
                    for (std::size_t i = 0; i < tokens; ++i) {
                        const Real* goi = go + (b * tokens + i) * d + h * dh;
                        // gradient w.r.t. the post-dropout weight, then back through dropout
                        Real dot = 0;
                        for (std::size_t j = 0; j < tokens; ++j) {
                            const Real m = drop ? mask[off + i * tokens + j] : Real(1);
                            Real s = 0;
                            for (std::size_t e = 0; e < dh; ++e) s += goi[e] * vv[(b * tokens + j) * d + h * dh + e];
                            gp[j] = s * m;
                            dot += gp[j] * P[i * tokens + j];
                            if (gv) {
                                const Real w = P[i * tokens + j] * m;
                                for (std::size_t e = 0; e < dh; ++e) gv[(b * tokens + j) * d + h * dh + e] += w * goi[e];
                            }
                        }
                        for (std::size_t j = 0; j < tokens; ++j) {
                            const Real gs = P[i * tokens + j] * (gp[j] - dot) * inv_scale;
                            if (gs == Real(0)) continue;
                            for (std::size_t e = 0; e < dh; ++e) {
                                if (gq) gq[(b * tokens + i) * d + h * dh + e] += gs * kv[(b * tokens + j) * d + h * dh + e];
                                if (gk) gk[(b * tokens + j) * d + h * dh + e] += gs * qv[(b * tokens + i) * d + h * dh + e];
                            }
                        }
                    }
                }
        },
        "attention");
}

/// 1-D convolution, stride 1, zero "same" padding. x [B, Cin, L], w [Cout, Cin, K] with odd K, b [Cout].
template <class Real>
Var<Real> conv1d(Var<Real> x, Var<Real> w, Var<Real> bias) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 3 || ws[1] != xs[1] || ws[2] % 2 == 0)
        throw ShapeError("conv1d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
    const std::size_t batch = xs[0], cin = xs[1], len = xs[2], cout = ws[0], ks = ws[2];
    if (bias.value().size() != cout) throw ShapeError("conv1d: bias length mismatch");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(ks / 2);
    Tensor<Real> out(Shape{batch, cout, len});
    const Real* xv = x.value().data().data();
    const Real* wv = w.value().data().data();
    const Real* bv = bias.value().data().data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t l = 0; l < len; ++l) {
                Real acc = bv[o];
                for (std::size_t c = 0; c < cin; ++c)
                    for (std::size_t j = 0; j < ks; ++j) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                        acc += wv[(o * cin + c) * ks + j] * xv[(b * cin + c) * len + src];
                    }
                out[(b * cout + o) * len + l] = acc;
            }
    const std::size_t ix = x.id, iw = w.id, ib = bias.id;
    return g.push(std::move(out), g.any_requires_grad({x, w, bias}),
                  [ix, iw, ib, batch, cin, cout, len, ks, pad](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* xv = g.value_at(ix).data().data();
                      const Real* wv = g.value_at(iw).data().data();
                      Real* gx = g.wants(ix) ? g.grad_slot(ix).data().data() : nullptr;
                      Real* gw = g.wants(iw) ? g.grad_slot(iw).data().data() : nullptr;
                      Real* gb = g.wants(ib) ? g.grad_slot(ib).data().data() : nullptr;
                      for (std::size_t b = 0; b < batch; ++b)
                          for (std::size_t o = 0; o < cout; ++o)
                              for (std::size_t l = 0; l < len; ++l) {
                                  const Real gv = go[(b * cout + o) * len + l];
                                  if (gb) gb[o] += gv;
                                  for (std::size_t c = 0; c < cin; ++c)
                                      for (std::size_t j = 0; j < ks; ++j) {
                                          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) - pad;
                                          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                                          if (gw) gw[(o * cin + c) * ks + j] += gv * xv[(b * cin + c) * len + src];
                                          if (gx) gx[(b * cin + c) * len + src] += gv * wv[(o * cin + c) * ks + j];
                                      }
                              }
                  },
                  "conv1d");
}

// ---------------------------------------------------------------------------
// shape manipulation

template <class Real>
Var<Real> reshape(Var<Real> x, Shape shape) {
    Graph<Real>& g = *x.graph;
    Tensor<Real> out = x.value().reshaped(std::move(shape));
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix](Graph<Real>& g, std::size_t self) {
                      const auto& go = g.out_grad(self).storage();
                      auto& dst = g.grad_slot(ix).storage();
                      for (std::size_t i = 0; i < go.size(); ++i) dst[i] += go[i];
                  },
                  "reshape");
}

/// Concatenation along `axis`; all other extents must agree.
template <class Real>
Var<Real> concat(Var<Real> a, Var<Real> b, std::size_t axis) {
    Graph<Real>& g = *a.graph;
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() != bs.size() || axis >= as.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < as.size(); ++i)
        if (i != axis && as[i] != bs[i]) throw ShapeError("concat: extent mismatch " + shape_str(as) + " vs " + shape_str(bs));
    const std::size_t outer = detail::prod(as, 0, axis);
    const std::size_t inner = detail::prod(as, axis + 1, as.size());
    const std::size_t na = as[axis] * inner, nb = bs[axis] * inner;
    Shape os = as;
    os[axis] += bs[axis];
    Tensor<Real> out(os);
    const Real* av = a.value().data().data();
    const Real* bv = b.value().data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy(av + o * na, av + (o + 1) * na, out.data().data() + o * (na + nb));
        std::copy(bv + o * nb, bv + (o + 1) * nb, out.data().data() + o * (na + nb) + na);
    }
    const std::size_t ia = a.id, ib = b.id;
    return g.push(std::move(out), g.any_requires_grad({a, b}),
                  [ia, ib, outer, na, nb](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      if (g.wants(ia)) {
                          Real* dst = g.grad_slot(ia).data().data();
                          for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t i = 0; i < na; ++i) dst[o * na + i] += go[o * (na + nb) + i];
                      }
                      if (g.wants(ib)) {
                          Real* dst = g.grad_slot(ib).data().data();
                          for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t i = 0; i < nb; ++i) dst[o * nb + i] += go[o * (na + nb) + na + i];
                      }
                  },
                  "concat");
}

/// Sub-range [start, start + count) of `axis`.
template <class Real>
Var<Real> slice(Var<Real> x, std::size_t axis, std::size_t start, std::size_t count) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    if (axis >= xs.size() || start + count > xs[axis] || count == 0) throw ShapeError("slice out of range");
    const std::size_t outer = detail::prod(xs, 0, axis);
    const std::size_t inner = detail::prod(xs, axis + 1, xs.size());
    const std::size_t full = xs[axis] * inner, part = count * inner, off = start * inner;
    Shape os = xs;
    os[axis] = count;
    Tensor<Real> out(os);
    const Real* xv = x.value().data().data();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(xv + o * full + off, xv + o * full + off + part, out.data().data() + o * part);
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix, outer, full, part, off](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      Real* dst = g.grad_slot(ix).data().data();
                      for (std::size_t o = 0; o < outer; ++o)
                          for (std::size_t i = 0; i < part; ++i) dst[o * full + off + i] += go[o * part + i];
                  },
                  "slice");
}

/// [B, M, N] -> [B, N, M].
template <class Real>
Var<Real> swap_last_two(Var<Real> x) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    if (xs.size() != 3) throw ShapeError("swap_last_two expects rank 3");
    const std::size_t batch = xs[0], m = xs[1], n = xs[2];
    Tensor<Real> out(Shape{batch, n, m});
    const Real* xv = x.value().data().data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[(b * n + j) * m + i] = xv[(b * m + i) * n + j];
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix, batch, m, n](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      Real* dst = g.grad_slot(ix).data().data();
                      for (std::size_t b = 0; b < batch; ++b)
                          for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) dst[(b * m + i) * n + j] += go[(b * n + j) * m + i];
                  },
                  "swap_last_two");
}

/// Row gather along axis 0: out[i] = x[index[i]]. Gradients scatter-add back.
template <class Real>
Var<Real> gather_rows(Var<Real> x, std::vector<std::size_t> index) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    const std::size_t row = x.value().size() / xs[0];
    Shape os = xs;
    os[0] = index.size();
    Tensor<Real> out(os);
    const Real* xv = x.value().data().data();
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= xs[0]) throw ShapeError("gather_rows: index out of range");
        std::copy(xv + index[i] * row, xv + (index[i] + 1) * row, out.data().data() + i * row);
    }
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix, row, index = std::move(index)](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      Real* dst = g.grad_slot(ix).data().data();
                      for (std::size_t i = 0; i < index.size(); ++i)
                          for (std::size_t j = 0; j < row; ++j) dst[index[i] * row + j] += go[i * row + j];
                  },
                  "gather_rows");
}

/// Per-feature embedding: x [B, k], w [k, d], b [k, d] -> [B, k, d] with out[b, j] = b[j] + x[b, j] * w[j].
template <class Real>
Var<Real> feature_tokenize(Var<Real> x, Var<Real> w, Var<Real> bias) {
    Graph<Real>& g = *x.graph;
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 2 || ws.size() != 2 || ws[0] != xs[1] || bias.shape() != ws)
        throw ShapeError("feature_tokenize: shape mismatch");
    const std::size_t batch = xs[0], k = xs[1], d = ws[1];
    Tensor<Real> out(Shape{batch, k, d});
    const Real* xv = x.value().data().data();
    const Real* wv = w.value().data().data();
    const Real* bv = bias.value().data().data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t e = 0; e < d; ++e) out[(b * k + j) * d + e] = bv[j * d + e] + xv[b * k + j] * wv[j * d + e];
    const std::size_t ix = x.id, iw = w.id, ib = bias.id;
    return g.push(std::move(out), g.any_requires_grad({x, w, bias}),
                  [ix, iw, ib, batch, k, d](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      const Real* xv = g.value_at(ix).data().data();
                      const Real* wv = g.value_at(iw).data().data();
                      Real* gx = g.wants(ix) ? g.grad_slot(ix).data().data() : nullptr;
                      Real* gw = g.wants(iw) ? g.grad_slot(iw).data().data() : nullptr;
                      Real* gb = g.wants(ib) ? g.grad_slot(ib).data().data() : nullptr;
                      for (std::size_t b = 0; b < batch; ++b)
                          for (std::size_t j = 0; j < k; ++j)
                              for (std::size_t e = 0; e < d; ++e) {
                                  const Real gv = go[(b * k + j) * d + e];
                                  if (gx) gx[b * k + j] += gv * wv[j * d + e];
                                  if (gw) gw[j * d + e] += gv * xv[b * k + j];
                                  if (gb) gb[j * d + e] += gv;
                              }
                  },
                  "feature_tokenize");
}

/// Repeats `x` along a new leading batch axis: [...] -> [batch, ...].
template <class Real>
Var<Real> broadcast_batch(Var<Real> x, std::size_t batch) {
    Graph<Real>& g = *x.graph;
    Shape os{batch};
    for (auto d : x.shape()) os.push_back(d);
    const std::size_t n = x.value().size();
    Tensor<Real> out(os);
    for (std::size_t b = 0; b < batch; ++b)
        std::copy(x.value().storage().begin(), x.value().storage().end(), out.data().data() + b * n);
    const std::size_t ix = x.id;
    return g.push(std::move(out), g.any_requires_grad({x}),
                  [ix, batch, n](Graph<Real>& g, std::size_t self) {
                      const Real* go = g.out_grad(self).data().data();
                      Real* dst = g.grad_slot(ix).data().data();
                      for (std::size_t b = 0; b < batch; ++b)
                          for (std::size_t i = 0; i < n; ++i) dst[i] += go[b * n + i];
                  },
                  "broadcast_batch");
}

// ---------------------------------------------------------------------------
// reductions and losses

template <class Real>
Var<Real> sum(Var<Real> x) {
    Graph<Real>& g = *x.graph;
    Real s = 0;
    for (Real v : x.value().storage()) s += v;
    const std::size_t ix = x.id;
    return g.push(Tensor<Real>::scalar(s), g.any_requires_grad({x}),
                  [ix](Graph<Real>& g, std::size_t self) {
                      const Real go = g.out_grad(self)[0];
                      for (auto& d : g.grad_slot(ix).storage()) d += go;
                  },
                  "sum");
}

template <class Real>
Var<Real> mean(Var<Real> x) {
    return scale(sum(x), Real(1) / Real(x.value().size()));
}

/// Mean smooth-L1 (Huber) loss between `pred` and the constant `target`:
/// 0.5 d^2 / beta where |d| < beta, |d| - 0.5 beta elsewhere, d = target - pred.
template <class Real>
Var<Real> smooth_l1_loss(Var<Real> pred, const Tensor<Real>& target, Real beta) {
    Graph<Real>& g = *pred.graph;
    require_same_shape(pred.value(), target, "smooth_l1");
    if (!(beta > 0)) throw InputError("smooth_l1: beta must be positive");
    const auto& pv = pred.value().storage();
    const auto& tv = target.storage();
    const std::size_t n = pv.size();
    std::vector<Real> slope(n);
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real d = tv[i] - pv[i];
        const Real ad = std::abs(d);
        if (ad < beta) {
            total += Real(0.5) * d * d / beta;
            slope[i] = -d / beta;
        } else {
            total += ad - Real(0.5) * beta;
            slope[i] = d > 0 ? Real(-1) : Real(1);
        }
    }
    const std::size_t ip = pred.id;
    return g.push(Tensor<Real>::scalar(total / Real(n)), g.any_requires_grad({pred}),
                  [ip, n, slope = std::move(slope)](Graph<Real>& g, std::size_t self) {
                      const Real go = g.out_grad(self)[0] / Real(n);
                      auto& dst = g.grad_slot(ip).storage();
                      for (std::size_t i = 0; i < n; ++i) dst[i] += go * slope[i];
                  },
                  "smooth_l1");
}

/// Mean squared error between `pred` and the constant `target`.
template <class Real>
Var<Real> mse_loss(Var<Real> pred, const Tensor<Real>& target) {
    Graph<Real>& g = *pred.graph;
    require_same_shape(pred.value(), target, "mse_loss");
    const auto& pv = pred.value().storage();
    const auto& tv = target.storage();
    Real total = 0;
    for (std::size_t i = 0; i < pv.size(); ++i) total += (pv[i] - tv[i]) * (pv[i] - tv[i]);
    const std::size_t ip = pred.id, n = pv.size();
    return g.push(Tensor<Real>::scalar(total / Real(n)), g.any_requires_grad({pred}),
                  [ip, n, target](Graph<Real>& g, std::size_t self) {
                      const Real go = g.out_grad(self)[0] * Real(2) / Real(n);
                      const auto& pv = g.value_at(ip).storage();
                      auto& dst = g.grad_slot(ip).storage();
                      for (std::size_t i = 0; i < n; ++i) dst[i] += go * (pv[i] - target[i]);
                  },
                  "mse_loss");
}

/// Mean softmax cross-entropy of logits [N, C] against integer labels in [0, C).
template <class Real>
Var<Real> softmax_cross_entropy(Var<Real> logits, const std::vector<std::size_t>& labels) {
    Graph<Real>& g = *logits.graph;
    const Shape& ls = logits.shape();
    if (ls.size() != 2 || ls[0] != labels.size()) throw ShapeError("softmax_cross_entropy: shape mismatch");
    const std::size_t n = ls[0], c = ls[1];
    const Real* lv = logits.value().data().data();
    std::vector<Real> probs(n * c);
    Real total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw ShapeError("softmax_cross_entropy: label out of range");
        Real mx = lv[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
        Real z = 0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(lv[i * c + j] - mx);
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(lv[i * c + j] - mx) / z;
        total -= lv[i * c + labels[i]] - mx - std::log(z);
    }
    const std::size_t il = logits.id;
    return g.push(Tensor<Real>::scalar(total / Real(n)), g.any_requires_grad({logits}),
                  [il, n, c, labels, probs = std::move(probs)](Graph<Real>& g, std::size_t self) {
                      const Real go = g.out_grad(self)[0] / Real(n);
                      Real* dst = g.grad_slot(il).data().data();
                      for (std::size_t i = 0; i < n; ++i)
                          for (std::size_t j = 0; j < c; ++j)
                              dst[i * c + j] += go * (probs[i * c + j] - (j == labels[i] ? Real(1) : Real(0)));
                  },
                  "softmax_cross_entropy");
}

} // namespace diffimpute::ops
