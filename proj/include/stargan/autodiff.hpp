#ifndef STARGAN_AUTODIFF_HPP_
#define STARGAN_AUTODIFF_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "stargan/conv_kernels.hpp"
#include "stargan/tensor.hpp"

namespace stargan::ad {

class Node;
using Var = std::shared_ptr<Node>;

// Backward functions receive the incoming gradient as a graph variable and
// return per-parent gradients (nullptr where the flag says the gradient is not
// needed). Because they build graph nodes rather than bare tensors, a gradient
// can itself be differentiated once more, which is what the gradient penalty
// needs.
using BackwardFn = std::function<std::vector<Var>(const Var&, const std::vector<bool>&)>;

class Node {
 public:
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> parents;
  BackwardFn backward;
  uint64_t id = 0;
};

inline uint64_t next_node_id() {
  static uint64_t counter = 0;
  return ++counter;
}

inline Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->id = next_node_id();
  return n;
}

inline Var leaf(Tensor t) {
  auto n = constant(std::move(t));
  n->requires_grad = true;
  return n;
}

inline Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  for (const auto& p : n->parents)
    if (p && p->requires_grad) n->requires_grad = true;
  n->id = next_node_id();
  return n;
}

// ---- elementwise ----

inline void check_same_shape(const Var& a, const Var& b, const char* who) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                Tensor::shape_str(a->value.shape()) + " vs " +
                                Tensor::shape_str(b->value.shape()));
}

inline Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += b->value[i];
  return make_op(std::move(out), {a, b},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? gy : nullptr, need[1] ? gy : nullptr};
                 });
}

inline Var neg(const Var& a);

inline Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
  return make_op(std::move(out), {a, b},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? gy : nullptr,
                                           need[1] ? neg(gy) : nullptr};
                 });
}

inline Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
  return make_op(std::move(out), {a, b},
                 [a, b](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? mul(gy, b) : nullptr,
                                           need[1] ? mul(gy, a) : nullptr};
                 });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return make_op(std::move(out), {a},
                 [s](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? scale(gy, s) : nullptr};
                 });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return make_op(std::move(out), {a},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? gy : nullptr};
                 });
}

// multiply by a fixed tensor (treated as a constant w.r.t. differentiation)
inline Var cmul(const Var& a, Tensor m) {
  if (!a->value.same_shape(m)) throw std::invalid_argument("cmul: shape mismatch");
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= m[i];
  return make_op(std::move(out), {a},
                 [m](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, m) : nullptr};
                 });
}

inline Var relu(const Var& a) {
  Tensor mask = a->value;
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    mask[i] = out[i] > 0.0 ? 1.0 : 0.0;
    out[i] = out[i] > 0.0 ? out[i] : 0.0;
  }
  return make_op(std::move(out), {a},
                 [mask](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, mask) : nullptr};
                 });
}

inline Var leaky_relu(const Var& a, double slope) {
  Tensor mask = a->value;
  Tensor out = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    mask[i] = out[i] > 0.0 ? 1.0 : slope;
    out[i] = out[i] > 0.0 ? out[i] : slope * out[i];
  }
  return make_op(std::move(out), {a},
                 [mask](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, mask) : nullptr};
                 });
}

inline Var tanh_(const Var& a) {
  Tensor out = a->value;
  Tensor d = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = std::tanh(out[i]);
    d[i] = 1.0 - out[i] * out[i];
  }
  return make_op(std::move(out), {a},
                 [d](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, d) : nullptr};
                 });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a->value;
  Tensor d = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    d[i] = out[i] * (1.0 - out[i]);
  }
  return make_op(std::move(out), {a},
                 [d](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, d) : nullptr};
                 });
}

inline Var log_(const Var& a) {
  Tensor out = a->value;
  Tensor d = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    d[i] = 1.0 / out[i];
    out[i] = std::log(out[i]);
  }
  return make_op(std::move(out), {a},
                 [d](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, d) : nullptr};
                 });
}

inline Var abs_(const Var& a) {
  Tensor out = a->value;
  Tensor sgn = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    sgn[i] = out[i] >= 0.0 ? 1.0 : -1.0;
    out[i] = std::fabs(out[i]);
  }
  return make_op(std::move(out), {a},
                 [sgn](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, sgn) : nullptr};
                 });
}

inline Var square(const Var& a) { return mul(a, a); }

inline Var sqrt_(const Var& a) {
  Tensor out = a->value;
  Tensor d = a->value;
  for (int64_t i = 0; i < out.numel(); ++i) {
    out[i] = std::sqrt(out[i]);
    d[i] = 0.5 / out[i];
  }
  return make_op(std::move(out), {a},
                 [d](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? cmul(gy, d) : nullptr};
                 });
}

// ---- reductions & broadcasts ----

inline Var broadcast_to(const Var& s, std::vector<int64_t> shape);

inline Var sum(const Var& a) {
  std::vector<int64_t> shape = a->value.shape();
  return make_op(Tensor::scalar(a->value.sum()), {a},
                 [shape](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? broadcast_to(gy, shape) : nullptr};
                 });
}

inline Var mean(const Var& a) {
  int64_t n = a->value.numel();
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

inline Var broadcast_to(const Var& s, std::vector<int64_t> shape) {
  if (s->value.numel() != 1) throw std::invalid_argument("broadcast_to: non-scalar");
  Tensor out = Tensor::full(shape, s->value.item());
  return make_op(std::move(out), {s},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? sum(gy) : nullptr};
                 });
}

inline Var broadcast_samples(const Var& v, std::vector<int64_t> shape);

// (N, ...) -> (N): sum over all non-batch axes
inline Var sum_samples(const Var& a) {
  int64_t n = a->value.dim(0);
  int64_t per = a->value.numel() / n;
  Tensor out({n});
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < per; ++j) s += a->value[i * per + j];
    out[i] = s;
  }
  std::vector<int64_t> shape = a->value.shape();
  return make_op(std::move(out), {a},
                 [shape](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? broadcast_samples(gy, shape) : nullptr};
                 });
}

inline Var broadcast_samples(const Var& v, std::vector<int64_t> shape) {
  int64_t n = shape.at(0);
  if (v->value.numel() != n) throw std::invalid_argument("broadcast_samples: size mismatch");
  Tensor out(shape);
  int64_t per = out.numel() / n;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < per; ++j) out[i * per + j] = v->value[i];
  return make_op(std::move(out), {v},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? sum_samples(gy) : nullptr};
                 });
}

inline Var channel_sum(const Var& a);

// x: (N, C, H, W), b: (C)
inline Var channel_bias_add(const Var& x, const Var& b) {
  int64_t n = x->value.dim(0), c = x->value.dim(1);
  int64_t hw = x->value.numel() / (n * c);
  if (b->value.numel() != c) throw std::invalid_argument("channel_bias_add: bias size");
  Tensor out = x->value;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      double bv = b->value[ci];
      double* row = out.data() + (i * c + ci) * hw;
      for (int64_t j = 0; j < hw; ++j) row[j] += bv;
    }
  return make_op(std::move(out), {x, b},
                 [](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? gy : nullptr,
                                           need[1] ? channel_sum(gy) : nullptr};
                 });
}

inline Var channel_sum(const Var& a) {
  int64_t n = a->value.dim(0), c = a->value.dim(1);
  int64_t hw = a->value.numel() / (n * c);
  Tensor out({c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* row = a->value.data() + (i * c + ci) * hw;
      double s = 0.0;
      for (int64_t j = 0; j < hw; ++j) s += row[j];
      out[ci] += s;
    }
  std::vector<int64_t> shape = a->value.shape();
  return make_op(std::move(out), {a},
                 [shape](const Var& gy, const std::vector<bool>& need) {
                   // grad of channel_sum: broadcast (C) over (N, C, H, W)
                   if (!need[0]) return std::vector<Var>{nullptr};
                   int64_t n2 = shape[0], c2 = shape[1];
                   int64_t hw2 = Tensor::count(shape) / (n2 * c2);
                   Tensor out2(shape);
                   for (int64_t i = 0; i < n2; ++i)
                     for (int64_t ci = 0; ci < c2; ++ci) {
                       double v = gy->value[ci];
                       double* row = out2.data() + (i * c2 + ci) * hw2;
                       for (int64_t j = 0; j < hw2; ++j) row[j] = v;
                     }
                   return std::vector<Var>{constant(std::move(out2))};
                 });
}

// ---- shape ops ----

inline Var reshape(const Var& a, std::vector<int64_t> shape) {
  if (Tensor::count(shape) != a->value.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  std::vector<int64_t> old_shape = a->value.shape();
  Tensor out(shape);
  std::copy(a->value.data(), a->value.data() + a->value.numel(), out.data());
  return make_op(std::move(out), {a},
                 [old_shape](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{need[0] ? reshape(gy, old_shape) : nullptr};
                 });
}

// channel slice [c0, c1) of (N, C, ...) ; backward pads the complement with zeros
inline Var slice_channels(const Var& a, int64_t c0, int64_t c1) {
  int64_t n = a->value.dim(0), c = a->value.dim(1);
  if (c0 < 0 || c1 > c || c0 >= c1) throw std::invalid_argument("slice_channels: bad range");
  int64_t hw = a->value.numel() / (n * c);
  std::vector<int64_t> shape = a->value.shape();
  std::vector<int64_t> out_shape = shape;
  out_shape[1] = c1 - c0;
  Tensor out(out_shape);
  for (int64_t i = 0; i < n; ++i)
    std::copy(a->value.data() + (i * c + c0) * hw, a->value.data() + (i * c + c1) * hw,
              out.data() + i * (c1 - c0) * hw);
  return make_op(std::move(out), {a},
                 [shape, c0, c1, hw](const Var& gy, const std::vector<bool>& need) {
                   if (!need[0]) return std::vector<Var>{nullptr};
                   int64_t n2 = shape[0], c2 = shape[1];
                   Tensor out2(shape);
                   for (int64_t i = 0; i < n2; ++i)
                     std::copy(gy->value.data() + i * (c1 - c0) * hw,
                               gy->value.data() + (i + 1) * (c1 - c0) * hw,
                               out2.data() + (i * c2 + c0) * hw);
                   // zeros elsewhere already; wrap with exact pad backward
                   auto pad = make_op(std::move(out2), {gy},
                                      [c0, c1](const Var& gz, const std::vector<bool>& nd) {
                                        return std::vector<Var>{
                                            nd[0] ? slice_channels(gz, c0, c1) : nullptr};
                                      });
                   return std::vector<Var>{pad};
                 });
}

inline Var concat_channels(const Var& a, const Var& b) {
  int64_t n = a->value.dim(0), ca = a->value.dim(1), cb = b->value.dim(1);
  int64_t hw = a->value.numel() / (n * ca);
  if (b->value.dim(0) != n || b->value.numel() / (n * cb) != hw)
    throw std::invalid_argument("concat_channels: shape mismatch");
  std::vector<int64_t> shape = a->value.shape();
  shape[1] = ca + cb;
  Tensor out(shape);
  for (int64_t i = 0; i < n; ++i) {
    std::copy(a->value.data() + i * ca * hw, a->value.data() + (i + 1) * ca * hw,
              out.data() + i * (ca + cb) * hw);
    std::copy(b->value.data() + i * cb * hw, b->value.data() + (i + 1) * cb * hw,
              out.data() + (i * (ca + cb) + ca) * hw);
  }
  return make_op(std::move(out), {a, b},
                 [ca, cb](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{
                       need[0] ? slice_channels(gy, 0, ca) : nullptr,
                       need[1] ? slice_channels(gy, ca, ca + cb) : nullptr};
                 });
}

// ---- convolution ----

inline Var conv_wgrad_op(const Var& x, const Var& g, int64_t s, int64_t p,
                         int64_t kh, int64_t kw) {
  Tensor gw = kernels::conv_wgrad(x->value, g->value, s, p, kh, kw);
  // Never differentiated further; reached only as the tail of a second-order
  // backward pass.
  return make_op(std::move(gw), {x, g},
                 [](const Var&, const std::vector<bool>&) -> std::vector<Var> {
                   throw std::logic_error("conv_wgrad_op is not differentiable");
                 });
}

inline Var conv2d(const Var& x, const Var& w, int64_t s, int64_t p);

// Transposed convolution / adjoint spread. x: (N, Ca, h, w), wt: (Ca, Cb, KH, KW),
// output (N, Cb, oh, ow) with oh = (h-1)*s - 2p + KH unless overridden.
inline Var conv_adjoint(const Var& x, const Var& wt, int64_t s, int64_t p,
                        int64_t oh, int64_t ow) {
  Tensor out = kernels::conv_igrad(x->value, wt->value, s, p, oh, ow);
  int64_t kh = wt->value.dim(2), kw = wt->value.dim(3);
  return make_op(std::move(out), {x, wt},
                 [x, wt, s, p, kh, kw](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{
                       need[0] ? conv2d(gy, wt, s, p) : nullptr,
                       need[1] ? conv_wgrad_op(gy, x, s, p, kh, kw) : nullptr};
                 });
}

inline Var conv_transpose2d(const Var& x, const Var& wt, int64_t s, int64_t p) {
  int64_t oh = kernels::deconv_out_size(x->value.dim(2), wt->value.dim(2), s, p);
  int64_t ow = kernels::deconv_out_size(x->value.dim(3), wt->value.dim(3), s, p);
  return conv_adjoint(x, wt, s, p, oh, ow);
}

inline Var conv2d(const Var& x, const Var& w, int64_t s, int64_t p) {
  Tensor out = kernels::conv_fwd(x->value, w->value, s, p);
  int64_t h = x->value.dim(2), ww = x->value.dim(3);
  int64_t kh = w->value.dim(2), kw = w->value.dim(3);
  return make_op(std::move(out), {x, w},
                 [x, w, s, p, h, ww, kh, kw](const Var& gy, const std::vector<bool>& need) {
                   return std::vector<Var>{
                       need[0] ? conv_adjoint(gy, w, s, p, h, ww) : nullptr,
                       need[1] ? conv_wgrad_op(x, gy, s, p, kh, kw) : nullptr};
                 });
}

// ---- instance normalization ----

// Per-(sample, channel) normalization with learnable affine. First-order only:
// its backward emits numeric gradients, which is all the generator path needs.
inline Var instance_norm(const Var& x, const Var& gamma, const Var& beta,
                         double eps = 1e-5) {
  int64_t n = x->value.dim(0), c = x->value.dim(1);
  int64_t hw = x->value.numel() / (n * c);
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw std::invalid_argument("instance_norm: affine size mismatch");
  Tensor out(x->value.shape());
  Tensor xhat(x->value.shape());
  Tensor inv_std({n, c});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* row = x->value.data() + (i * c + ci) * hw;
      double mu = 0.0;
      for (int64_t j = 0; j < hw; ++j) mu += row[j];
      mu /= hw;
      double var = 0.0;
      for (int64_t j = 0; j < hw; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= hw;
      double is = 1.0 / std::sqrt(var + eps);
      inv_std[i * c + ci] = is;
      double g = gamma->value[ci], b = beta->value[ci];
      double* xh = xhat.data() + (i * c + ci) * hw;
      double* o = out.data() + (i * c + ci) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        xh[j] = (row[j] - mu) * is;
        o[j] = g * xh[j] + b;
      }
    }
  auto gamma_v = gamma;
  return make_op(
      std::move(out), {x, gamma, beta},
      [n, c, hw, xhat, inv_std, gamma_v](const Var& gy, const std::vector<bool>& need) {
        std::vector<Var> grads(3, nullptr);
        if (need[1] || need[2]) {
          Tensor gg({c}), gb({c});
          for (int64_t i = 0; i < n; ++i)
            for (int64_t ci = 0; ci < c; ++ci) {
              const double* g = gy->value.data() + (i * c + ci) * hw;
              const double* xh = xhat.data() + (i * c + ci) * hw;
              double sg = 0.0, sb = 0.0;
              for (int64_t j = 0; j < hw; ++j) {
                sg += g[j] * xh[j];
                sb += g[j];
              }
              gg[ci] += sg;
              gb[ci] += sb;
            }
          if (need[1]) grads[1] = constant(std::move(gg));
          if (need[2]) grads[2] = constant(std::move(gb));
        }
        if (need[0]) {
          Tensor gx(gy->value.shape());
          for (int64_t i = 0; i < n; ++i)
            for (int64_t ci = 0; ci < c; ++ci) {
              const double* g = gy->value.data() + (i * c + ci) * hw;
              const double* xh = xhat.data() + (i * c + ci) * hw;
              double* o = gx.data() + (i * c + ci) * hw;
              double mg = 0.0, mgx = 0.0;
              for (int64_t j = 0; j < hw; ++j) {
                mg += g[j];
                mgx += g[j] * xh[j];
              }
              mg /= hw;
              mgx /= hw;
              double a = gamma_v->value[ci] * inv_std[i * c + ci];
              for (int64_t j = 0; j < hw; ++j)
                o[j] = a * (g[j] - mg - xh[j] * mgx);
            }
          grads[0] = constant(std::move(gx));
        }
        return grads;
      });
}

// ---- classification losses ----

// Softmax cross-entropy over rows of (N, K) against one-hot targets, mean
// over N. Fused with an analytic backward for numerical stability.
inline Var softmax_ce(const Var& logits, const Tensor& targets) {
  int64_t n = logits->value.dim(0), k = logits->value.dim(1);
  if (!logits->value.same_shape(targets))
    throw std::invalid_argument("softmax_ce: target shape mismatch");
  Tensor probs({n, k});
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double* z = logits->value.data() + i * k;
    double m = z[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, z[j]);
    double se = 0.0;
    for (int64_t j = 0; j < k; ++j) se += std::exp(z[j] - m);
    double lse = m + std::log(se);
    for (int64_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(z[j] - lse);
      loss += targets[i * k + j] * (lse - z[j]);
    }
  }
  loss /= n;
  return make_op(Tensor::scalar(loss), {logits},
                 [probs, targets, n, k](const Var& gy, const std::vector<bool>& need) {
                   if (!need[0]) return std::vector<Var>{nullptr};
                   double g = gy->value.item();
                   Tensor gx({n, k});
                   for (int64_t i = 0; i < n * k; ++i)
                     gx[i] = g * (probs[i] - targets[i]) / n;
                   return std::vector<Var>{constant(std::move(gx))};
                 });
}

// Per-entry sigmoid cross-entropy with {0,1} targets, mean over all entries.
inline Var sigmoid_bce(const Var& logits, const Tensor& targets) {
  if (!logits->value.same_shape(targets))
    throw std::invalid_argument("sigmoid_bce: target shape mismatch");
  int64_t m = logits->value.numel();
  Tensor sig(logits->value.shape());
  double loss = 0.0;
  for (int64_t i = 0; i < m; ++i) {
    double z = logits->value[i], t = targets[i];
    sig[i] = 1.0 / (1.0 + std::exp(-z));
    loss += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::fabs(z)));
  }
  loss /= m;
  return make_op(Tensor::scalar(loss), {logits},
                 [sig, targets, m](const Var& gy, const std::vector<bool>& need) {
                   if (!need[0]) return std::vector<Var>{nullptr};
                   double g = gy->value.item();
                   Tensor gx(sig.shape());
                   for (int64_t i = 0; i < m; ++i)
                     gx[i] = g * (sig[i] - targets[i]) / m;
                   return std::vector<Var>{constant(std::move(gx))};
                 });
}

// ---- reverse sweep ----

// Gradients of `output` w.r.t. each of `wrt`. The returned variables stay in
// the graph, so they can be differentiated again (used by the gradient
// penalty). Nodes that cannot reach any `wrt` are skipped entirely.
inline std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt,
                             const Var& seed = nullptr) {
  std::unordered_set<const Node*> wrt_set;
  for (const auto& v : wrt) wrt_set.insert(v.get());

  // active(node): node or some ancestor is in wrt
  std::unordered_map<const Node*, bool> active;
  std::function<bool(const Var&)> mark = [&](const Var& v) -> bool {
    if (!v || !v->requires_grad) return false;
    auto it = active.find(v.get());
    if (it != active.end()) return it->second;
    active[v.get()] = false;  // breaks cycles (there are none, but be safe)
    bool a = wrt_set.count(v.get()) > 0;
    for (const auto& p : v->parents) a = mark(p) || a;
    active[v.get()] = a;
    return a;
  };
  if (!mark(output)) {
    std::vector<Var> out;
    for (const auto& v : wrt) out.push_back(constant(Tensor::zeros(v->value.shape())));
    return out;
  }

  // deterministic postorder over active nodes
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  std::unordered_map<const Node*, Var> by_ptr;
  std::function<void(const Var&)> dfs = [&](const Var& v) {
    if (!v || visited.count(v.get())) return;
    auto it = active.find(v.get());
    if (it == active.end() || !it->second) return;
    visited.insert(v.get());
    for (const auto& p : v->parents) dfs(p);
    order.push_back(v.get());
    by_ptr[v.get()] = v;
  };
  dfs(output);

  std::unordered_map<const Node*, Var> grads;
  grads[output.get()] = seed ? seed : constant(Tensor::full(output->value.shape(), 1.0));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto git = grads.find(node);
    if (git == grads.end()) continue;
    const Var& v = by_ptr[node];
    if (v->parents.empty()) continue;
    std::vector<bool> need(v->parents.size(), false);
    bool any = false;
    for (size_t i = 0; i < v->parents.size(); ++i) {
      const auto& p = v->parents[i];
      if (p) {
        auto ait = active.find(p.get());
        need[i] = ait != active.end() && ait->second;
        any = any || need[i];
      }
    }
    if (!any) continue;
    std::vector<Var> pg = v->backward(git->second, need);
    for (size_t i = 0; i < v->parents.size(); ++i) {
      if (!need[i] || !pg[i]) continue;
      const Node* pn = v->parents[i].get();
      auto pit = grads.find(pn);
      if (pit == grads.end())
        grads[pn] = pg[i];
      else
        pit->second = add(pit->second, pg[i]);
    }
  }

  std::vector<Var> out;
  for (const auto& v : wrt) {
    auto it2 = grads.find(v.get());
    out.push_back(it2 != grads.end() ? it2->second
                                     : constant(Tensor::zeros(v->value.shape())));
  }
  return out;
}

}  // namespace stargan::ad

#endif  // STARGAN_AUTODIFF_HPP_
