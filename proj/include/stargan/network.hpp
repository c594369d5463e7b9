#ifndef STARGAN_NETWORK_HPP_
#define STARGAN_NETWORK_HPP_

#include <utility>
#include <vector>

#include "stargan/autodiff.hpp"
#include "stargan/labels.hpp"
#include "stargan/net_spec.hpp"
#include "stargan/rng.hpp"

namespace stargan {

namespace detail {

inline Tensor init_conv_weight(std::vector<int64_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, 0.02);
  return t;
}

}  // namespace detail

// One materialized layer. Residual blocks carry a second conv/norm pair.
struct MaterializedLayer {
  LayerSpec spec;
  ad::Var w, b, gamma, beta;
  ad::Var w2, b2, gamma2, beta2;
};

// A NetworkSpec bound to parameter tensors. Forward passes build autodiff
// graphs; the parameter count matches infer_shapes_and_params exactly.
class Network {
 public:
  Network(NetworkSpec spec, RngStream& rng) : spec_(std::move(spec)) {
    spec_.validate();
    int64_t in_c = spec_.input_channels;
    for (const auto& l : spec_.layers) {
      layers_.push_back(make_layer(l, in_c, rng));
      in_c = l.out_channels;
    }
    if (spec_.heads) {
      src_ = make_layer(spec_.heads->first, in_c, rng);
      cls_ = make_layer(spec_.heads->second, in_c, rng);
    }
  }

  const NetworkSpec& spec() const { return spec_; }

  std::vector<ad::Var> params() const {
    std::vector<ad::Var> out;
    auto push = [&out](const MaterializedLayer& l) {
      for (const ad::Var& v : {l.w, l.b, l.gamma, l.beta, l.w2, l.b2, l.gamma2, l.beta2})
        if (v) out.push_back(v);
    };
    for (const auto& l : layers_) push(l);
    if (spec_.heads) {
      push(src_);
      push(cls_);
    }
    return out;
  }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& p : params()) n += p->value.numel();
    return n;
  }

  ad::Var forward_body(ad::Var x) const {
    for (const auto& l : layers_) x = apply_layer(l, x);
    return x;
  }

  // (src_map, cls_logits) — cls flattened to (N, n_d)
  std::pair<ad::Var, ad::Var> forward_heads(const ad::Var& x) const {
    if (!spec_.heads) throw std::logic_error("network has no heads");
    ad::Var h = forward_body(x);
    ad::Var src = apply_layer(src_, h);
    ad::Var cls = apply_layer(cls_, h);
    int64_t n = cls->value.dim(0), c = cls->value.dim(1);
    if (cls->value.numel() != n * c)
      throw std::logic_error("cls head did not collapse to (1, 1, n_d)");
    return {src, ad::reshape(cls, {n, c})};
  }

 private:
  static MaterializedLayer make_layer(const LayerSpec& l, int64_t in_c, RngStream& rng) {
    MaterializedLayer m;
    m.spec = l;
    auto affine = [&](int64_t c) {
      return std::pair{ad::leaf(Tensor::full({c}, 1.0)), ad::leaf(Tensor::zeros({c}))};
    };
    if (l.kind == LayerKind::transposed_conv) {
      m.w = ad::leaf(detail::init_conv_weight({in_c, l.out_channels, l.kernel_h, l.kernel_w}, rng));
    } else {
      m.w = ad::leaf(detail::init_conv_weight({l.out_channels, in_c, l.kernel_h, l.kernel_w}, rng));
    }
    m.b = ad::leaf(Tensor::zeros({l.out_channels}));
    if (l.norm == NormKind::instance) std::tie(m.gamma, m.beta) = affine(l.out_channels);
    if (l.kind == LayerKind::residual_block) {
      m.w2 = ad::leaf(detail::init_conv_weight({l.out_channels, l.out_channels, l.kernel_h, l.kernel_w}, rng));
      m.b2 = ad::leaf(Tensor::zeros({l.out_channels}));
      if (l.norm == NormKind::instance) std::tie(m.gamma2, m.beta2) = affine(l.out_channels);
    }
    return m;
  }

  static ad::Var activate(const ad::Var& x, ActKind act) {
    switch (act) {
      case ActKind::relu: return ad::relu(x);
      case ActKind::leaky_relu: return ad::leaky_relu(x, kLeakySlope);
      case ActKind::tanh: return ad::tanh_(x);
      case ActKind::none: return x;
    }
    return x;
  }

  static ad::Var apply_layer(const MaterializedLayer& m, ad::Var x) {
    const LayerSpec& l = m.spec;
    if (l.kind == LayerKind::residual_block) {
      ad::Var h = ad::channel_bias_add(ad::conv2d(x, m.w, l.stride, l.padding), m.b);
      if (m.gamma) h = ad::instance_norm(h, m.gamma, m.beta);
      h = activate(h, l.act);
      h = ad::channel_bias_add(ad::conv2d(h, m.w2, l.stride, l.padding), m.b2);
      if (m.gamma2) h = ad::instance_norm(h, m.gamma2, m.beta2);
      return ad::add(x, h);
    }
    ad::Var h;
    if (l.kind == LayerKind::transposed_conv)
      h = ad::conv_transpose2d(x, m.w, l.stride, l.padding);
    else
      h = ad::conv2d(x, m.w, l.stride, l.padding);
    h = ad::channel_bias_add(h, m.b);
    if (m.gamma) h = ad::instance_norm(h, m.gamma, m.beta);
    return activate(h, l.act);
  }

  NetworkSpec spec_;
  std::vector<MaterializedLayer> layers_;
  MaterializedLayer src_, cls_;
};

// Generator: image + spatially replicated unified label in, image out.
class Generator {
 public:
  Generator(NetworkSpec spec, RngStream& rng) : net_(std::move(spec), rng) {}

  ad::Var forward(const ad::Var& images, const std::vector<UnifiedLabel>& labels) const {
    int64_t h = images->value.dim(2), w = images->value.dim(3);
    ad::Var lab = ad::constant(replicate_labels_nchw(labels, h, w));
    return net_.forward_body(ad::concat_channels(images, lab));
  }

  ad::Var forward(const Tensor& images, const std::vector<UnifiedLabel>& labels) const {
    return forward(ad::constant(images), labels);
  }

  // raw unified vectors, for evaluation probes with overridden masks
  ad::Var forward_raw(const Tensor& images, const std::vector<std::vector<double>>& vectors) const {
    std::vector<UnifiedLabel> labels;
    for (const auto& v : vectors) labels.push_back(UnifiedLabel{v, 0});
    return forward(ad::constant(images), labels);
  }

  const Network& net() const { return net_; }
  Network& net() { return net_; }

 private:
  Network net_;
};

class Discriminator {
 public:
  Discriminator(NetworkSpec spec, RngStream& rng) : net_(std::move(spec), rng) {}

  std::pair<ad::Var, ad::Var> forward(const ad::Var& images) const {
    return net_.forward_heads(images);
  }

  std::pair<ad::Var, ad::Var> forward(const Tensor& images) const {
    return net_.forward_heads(ad::constant(images));
  }

  const Network& net() const { return net_; }
  Network& net() { return net_; }

 private:
  Network net_;
};

}  // namespace stargan

#endif  // STARGAN_NETWORK_HPP_
