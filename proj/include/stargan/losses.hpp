#ifndef STARGAN_LOSSES_HPP_
#define STARGAN_LOSSES_HPP_

#include <functional>
#include <vector>

#include "stargan/autodiff.hpp"
#include "stargan/labels.hpp"
#include "stargan/rng.hpp"

namespace stargan {

enum class AdvVariant { gan, wgan_gp };

struct LossConfig {
  double lambda_cls = 1.0;
  double lambda_rec = 10.0;
  double lambda_gp = 10.0;
  AdvVariant adv_variant = AdvVariant::wgan_gp;

  void validate() const {
    if (lambda_cls < 0 || lambda_rec < 0 || lambda_gp < 0)
      throw std::invalid_argument("LossConfig: all lambdas must be >= 0");
  }
};

struct LossBreakdown {
  double adv = 0, cls = 0, rec = 0, gp = 0, total = 0;
};

// Original saturating objective over post-sigmoid probabilities:
// mean(log D(x)) + mean(log(1 - D(G(x,c)))).
inline ad::Var adv_loss_gan(const ad::Var& d_real, const ad::Var& d_fake) {
  for (const ad::Var& v : {d_real, d_fake})
    for (int64_t i = 0; i < v->value.numel(); ++i)
      if (v->value[i] <= 0.0 || v->value[i] >= 1.0)
        throw std::invalid_argument("adv_loss_gan: inputs must be probabilities in (0,1)");
  return ad::add(ad::mean(ad::log_(d_real)),
                 ad::mean(ad::log_(ad::add_scalar(ad::neg(d_fake), 1.0))));
}

// Critic objective with gradient penalty:
// mean(D(x)) - mean(D(G)) - lambda_gp * mean((||grad|| - 1)^2).
// The critic maximizes this; L_D negates it.
inline ad::Var adv_loss_wgan_gp(const ad::Var& d_real, const ad::Var& d_fake,
                                const ad::Var& grad_norms, const LossConfig& cfg) {
  ad::Var pen = ad::mean(ad::square(ad::add_scalar(grad_norms, -1.0)));
  return ad::sub(ad::sub(ad::mean(d_real), ad::mean(d_fake)),
                 ad::scale(pen, cfg.lambda_gp));
}

// x_hat = eps * real + (1 - eps) * fake, eps drawn once per sample.
inline std::pair<Tensor, std::vector<double>> interpolate(const Tensor& real,
                                                          const Tensor& fake,
                                                          RngStream& rng) {
  if (!real.same_shape(fake)) throw std::invalid_argument("interpolate: shape mismatch");
  int64_t n = real.dim(0);
  int64_t per = real.numel() / n;
  std::vector<double> eps(n);
  Tensor out(real.shape());
  for (int64_t i = 0; i < n; ++i) {
    eps[i] = rng.uniform();
    for (int64_t j = 0; j < per; ++j)
      out[i * per + j] = eps[i] * real[i * per + j] + (1.0 - eps[i]) * fake[i * per + j];
  }
  return {out, eps};
}

// Per-sample L2 norms of the critic gradient at x_hat, kept in the graph so
// the penalty can be differentiated w.r.t. critic parameters.
inline ad::Var critic_grad_norms(const std::function<ad::Var(const ad::Var&)>& d_src,
                                 const Tensor& x_hat) {
  ad::Var xh = ad::leaf(x_hat);
  ad::Var score_sum = ad::sum(d_src(xh));
  ad::Var g = ad::grad(score_sum, {xh})[0];
  return ad::sqrt_(ad::add_scalar(ad::sum_samples(ad::square(g)), 1e-12));
}

// Domain classification loss restricted to the origin dataset's logit slice.
// Logits outside the slice are never touched, so their gradients are exactly
// zero. Used for both real images with original labels and fake images with
// target labels.
inline ad::Var cls_loss(const ad::Var& cls_logits, const std::vector<UnifiedLabel>& labels,
                        const LabelUniverse& universe) {
  if (labels.empty()) throw std::invalid_argument("cls_loss: empty batch");
  int64_t origin = labels.front().origin;
  for (const auto& u : labels)
    if (u.origin != origin) throw std::invalid_argument("cls_loss: mixed-origin batch");
  int64_t n = static_cast<int64_t>(labels.size());
  if (cls_logits->value.dim(0) != n || cls_logits->value.dim(1) != universe.total_label_dim())
    throw std::invalid_argument("cls_loss: logits must be (N, total_label_dim)");
  const DatasetSpec& ds = universe.datasets[origin];
  int64_t off = universe.slice_offset(origin);
  ad::Var slice = ad::slice_channels(cls_logits, off, off + ds.dim);
  Tensor targets({n, ds.dim});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < ds.dim; ++j) targets[i * ds.dim + j] = labels[i].values[off + j];
  if (ds.kind == LabelKind::categorical) return ad::softmax_ce(slice, targets);
  return ad::sigmoid_bce(slice, targets);
}

inline ad::Var rec_loss(const ad::Var& x, const ad::Var& x_rec) {
  ad::check_same_shape(x, x_rec, "rec_loss");
  return ad::mean(ad::abs_(ad::sub(x, x_rec)));
}

inline ad::Var rec_loss(const Tensor& x, const ad::Var& x_rec) {
  return rec_loss(ad::constant(x), x_rec);
}

// L_D = -L_adv + lambda_cls * L_cls^r
inline LossBreakdown total_d_loss(double adv, double cls_r, double gp,
                                  const LossConfig& cfg) {
  LossBreakdown b;
  b.adv = adv;
  b.cls = cls_r;
  b.gp = gp;
  b.total = -adv + cfg.lambda_cls * cls_r;
  return b;
}

// L_G = L_adv + lambda_cls * L_cls^f + lambda_rec * L_rec
inline LossBreakdown total_g_loss(double adv, double cls_f, double rec,
                                  const LossConfig& cfg) {
  LossBreakdown b;
  b.adv = adv;
  b.cls = cls_f;
  b.rec = rec;
  b.total = adv + cfg.lambda_cls * cls_f + cfg.lambda_rec * rec;
  return b;
}

}  // namespace stargan

#endif  // STARGAN_LOSSES_HPP_
