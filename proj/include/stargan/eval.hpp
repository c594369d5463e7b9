#ifndef STARGAN_EVAL_HPP_
#define STARGAN_EVAL_HPP_

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "json.hpp"
#include "stargan/data.hpp"
#include "stargan/losses.hpp"
#include "stargan/network.hpp"
#include "stargan/optimizer.hpp"

namespace stargan {

using Classifier = std::function<int64_t(const Tensor&)>;

struct EvalReport {
  double classification_error = 0.0;
  std::vector<double> per_target_errors;
  int64_t n_images = 0;
  int64_t params_generator = 0;
  int64_t params_discriminator = 0;
  int64_t params_total = 0;
  double classifier_accuracy = 1.0;
  bool classifier_trusted = true;

  nlohmann::json to_json() const {
    return {{"classification_error", classification_error},
            {"per_target_errors", per_target_errors},
            {"n_images", n_images},
            {"params_generator", params_generator},
            {"params_discriminator", params_discriminator},
            {"params_total", params_total},
            {"classifier_accuracy", classifier_accuracy},
            {"classifier_trusted", classifier_trusted}};
  }
};

// ---- parameter report ----

inline EvalReport param_report(const NetworkSpec& g_spec, const NetworkSpec& d_spec,
                               int64_t h, int64_t w) {
  EvalReport r;
  r.params_generator = infer_shapes_and_params(g_spec, h, w).total_params;
  r.params_discriminator = infer_shapes_and_params(d_spec, h, w).total_params;
  r.params_total = r.params_generator + r.params_discriminator;
  return r;
}

// ---- evaluation classifier ----

struct EvalClassifierConfig {
  int64_t epochs = 15;
  double lr = 1e-3;
  int64_t batch_size = 16;
  double holdout_frac = 0.1;
  double accuracy_floor = 0.95;
  uint64_t seed = 0;
};

// A small CNN trained on (image, class) pairs; at desk scale the analytic
// oracle usually replaces it, but the trained path exists for corpora without
// a closed-form labeler.
class EvalClassifier {
 public:
  EvalClassifier(const ImageSet& train, const DatasetSpec& spec,
                 const EvalClassifierConfig& cfg) {
    spec.validate();
    if (spec.kind != LabelKind::categorical)
      throw std::invalid_argument("EvalClassifier: categorical labels required");
    if (train.empty()) throw std::invalid_argument("EvalClassifier: empty train set");
    n_classes_ = spec.dim;
    universe_.datasets.push_back(spec);

    std::vector<int64_t> class_of;
    for (const auto& rec : train) {
      if (!spec.label_valid(rec.label))
        throw std::invalid_argument("EvalClassifier: invalid label in train set");
      class_of.push_back(std::find(rec.label.begin(), rec.label.end(), 1.0) -
                         rec.label.begin());
    }
    if (std::set<int64_t>(class_of.begin(), class_of.end()).size() < 2)
      throw std::invalid_argument("EvalClassifier: degenerate single-class dataset");

    int64_t h = train[0].pixels.dim(1), w = train[0].pixels.dim(2);
    RngStream init_rng = RngStream::substream(cfg.seed, "eval-classifier-init");
    net_.emplace(stargan_discriminator_spec(h, w, n_classes_, 0.25), init_rng);

    RngStream rng = RngStream::substream(cfg.seed, "eval-classifier");
    std::vector<int64_t> idx(train.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
    rng.shuffle(idx);
    int64_t n_hold = static_cast<int64_t>(cfg.holdout_frac * idx.size());
    std::vector<int64_t> hold(idx.begin(), idx.begin() + n_hold);
    std::vector<int64_t> fit(idx.begin() + n_hold, idx.end());
    if (fit.empty()) throw std::invalid_argument("EvalClassifier: no training rows left");

    Adam opt(net_->net().params(), 0.5, 0.999);
    int64_t bs = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(fit.size()));
    for (int64_t e = 0; e < cfg.epochs; ++e) {
      rng.shuffle(fit);
      for (int64_t b = 0; b + bs <= static_cast<int64_t>(fit.size()); b += bs) {
        std::vector<int64_t> batch(fit.begin() + b, fit.begin() + b + bs);
        Tensor images = stack_images(train, batch);
        std::vector<UnifiedLabel> labels;
        for (int64_t i : batch)
          labels.push_back(encode_unified(train[i].label, 0, universe_));
        auto [src, logits] = net_->forward(images);
        (void)src;
        ad::Var loss = cls_loss(logits, labels, universe_);
        opt.step(ad::grad(loss, opt.params()), cfg.lr);
      }
    }

    const auto& eval_idx = hold.empty() ? fit : hold;
    int64_t correct = 0;
    for (int64_t i : eval_idx)
      if (classify(train[i].pixels) == class_of[i]) ++correct;
    accuracy_ = static_cast<double>(correct) / eval_idx.size();
    trusted_ = accuracy_ >= cfg.accuracy_floor;
  }

  int64_t classify(const Tensor& img) const {
    Tensor batch({1, img.dim(0), img.dim(1), img.dim(2)});
    std::copy(img.data(), img.data() + img.numel(), batch.data());
    auto [src, logits] = net_->forward(batch);
    (void)src;
    int64_t best = 0;
    for (int64_t k = 1; k < n_classes_; ++k)
      if (logits->value[k] > logits->value[best]) best = k;
    return best;
  }

  Classifier fn() const {
    return [this](const Tensor& img) { return classify(img); };
  }

  double accuracy() const { return accuracy_; }
  bool trusted() const { return trusted_; }

 private:
  int64_t n_classes_ = 0;
  LabelUniverse universe_;
  std::optional<Discriminator> net_;
  double accuracy_ = 0.0;
  bool trusted_ = false;
};

// ---- translation classification error ----

namespace detail {

inline Tensor slice_sample(const Tensor& batch, int64_t i) {
  int64_t c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor out({c, h, w});
  std::copy(batch.data() + i * out.numel(), batch.data() + (i + 1) * out.numel(),
            out.data());
  return out;
}

}  // namespace detail

// Translate every test image into every domain of dataset `origin` and
// classify the results. Per-target error vector plus the image-weighted mean.
inline EvalReport classification_error_of_translations(const Generator& g,
                                                       const ImageSet& test,
                                                       int64_t origin,
                                                       const LabelUniverse& universe,
                                                       const Classifier& classifier,
                                                       int64_t batch_size = 16) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  const DatasetSpec& ds = universe.datasets.at(origin);
  EvalReport r;
  r.per_target_errors.assign(ds.dim, 0.0);
  std::vector<int64_t> per_target_n(ds.dim, 0);
  for (int64_t target = 0; target < ds.dim; ++target) {
    std::vector<double> one_hot(ds.dim, 0.0);
    one_hot[target] = 1.0;
    UnifiedLabel label = encode_unified(one_hot, origin, universe);
    for (int64_t b = 0; b < static_cast<int64_t>(test.size()); b += batch_size) {
      std::vector<int64_t> idx;
      for (int64_t i = b; i < std::min<int64_t>(b + batch_size, test.size()); ++i)
        idx.push_back(i);
      Tensor images = stack_images(test, idx);
      std::vector<UnifiedLabel> labels(idx.size(), label);
      Tensor out = g.forward(images, labels)->value;
      for (size_t i = 0; i < idx.size(); ++i) {
        if (classifier(detail::slice_sample(out, i)) != target)
          r.per_target_errors[target] += 1.0;
        ++per_target_n[target];
      }
    }
  }
  double total_err = 0.0;
  int64_t total_n = 0;
  for (int64_t t = 0; t < ds.dim; ++t) {
    total_err += r.per_target_errors[t];
    total_n += per_target_n[t];
    r.per_target_errors[t] /= per_target_n[t];
  }
  r.classification_error = total_err / total_n;
  r.n_images = total_n;
  return r;
}

// Mean L1 of the cycle x -> G(x,c) -> G(.,c') against x, over all images and
// all target domains of dataset `origin`, in [-1,1] pixel units.
inline double cycle_reconstruction_l1(const Generator& g, const ImageSet& set,
                                      int64_t origin, const LabelUniverse& universe,
                                      int64_t batch_size = 16) {
  if (set.empty()) throw std::invalid_argument("cycle_reconstruction_l1: empty set");
  const DatasetSpec& ds = universe.datasets.at(origin);
  double total = 0.0;
  int64_t count = 0;
  for (int64_t target = 0; target < ds.dim; ++target) {
    std::vector<double> one_hot(ds.dim, 0.0);
    one_hot[target] = 1.0;
    UnifiedLabel tl = encode_unified(one_hot, origin, universe);
    for (int64_t b = 0; b < static_cast<int64_t>(set.size()); b += batch_size) {
      std::vector<int64_t> idx;
      for (int64_t i = b; i < std::min<int64_t>(b + batch_size, set.size()); ++i)
        idx.push_back(i);
      Tensor images = stack_images(set, idx);
      std::vector<UnifiedLabel> targets(idx.size(), tl);
      std::vector<UnifiedLabel> originals;
      for (int64_t i : idx)
        originals.push_back(encode_unified(set[i].label, origin, universe));
      Tensor fake = g.forward(images, targets)->value;
      Tensor rec = g.forward(fake, originals)->value;
      for (int64_t j = 0; j < images.numel(); ++j) total += std::fabs(images[j] - rec[j]);
      count += images.numel();
    }
  }
  return total / count;
}

// ---- image grids ----

// Rows = inputs; column 0 is the input, later columns its translations under
// each target vector (raw unified encoding, so overridden masks work too).
inline void emit_grid(const Generator& g, const ImageSet& inputs,
                      const std::vector<std::vector<double>>& target_vectors,
                      const std::filesystem::path& out) {
  if (inputs.empty()) throw std::invalid_argument("emit_grid: no inputs");
  int64_t h = inputs[0].pixels.dim(1), w = inputs[0].pixels.dim(2);
  int64_t rows = static_cast<int64_t>(inputs.size());
  int64_t cols = 1 + static_cast<int64_t>(target_vectors.size());
  cv::Mat grid(static_cast<int>(rows * h), static_cast<int>(cols * w), CV_8UC3);
  for (int64_t r = 0; r < rows; ++r) {
    mat_from_tensor(inputs[r].pixels)
        .copyTo(grid(cv::Rect(0, static_cast<int>(r * h), static_cast<int>(w),
                              static_cast<int>(h))));
    for (int64_t c = 0; c < cols - 1; ++c) {
      Tensor batch({1, 3, h, w});
      std::copy(inputs[r].pixels.data(), inputs[r].pixels.data() + batch.numel(),
                batch.data());
      Tensor out_img = g.forward_raw(batch, {target_vectors[c]})->value;
      mat_from_tensor(detail::slice_sample(out_img, 0))
          .copyTo(grid(cv::Rect(static_cast<int>((c + 1) * w), static_cast<int>(r * h),
                                static_cast<int>(w), static_cast<int>(h))));
    }
  }
  if (!cv::imwrite(out.string(), grid))
    throw std::runtime_error("emit_grid: cannot write " + out.string());
}

// ---- mask-vector probe ----

struct MaskProbeReport {
  double proper_error = 0.0;
  double wrong_error = 0.0;
  int64_t n = 0;
};

// Translate `inputs` toward every class of dataset `target_dataset`, once with
// the mask marking that dataset (proper) and once with the mask marking
// another dataset (wrong), then classify. Optionally writes the paired rows
// as <out>_proper.png / <out>_wrong.png.
inline MaskProbeReport mask_probe(const Generator& g, const ImageSet& inputs,
                                  int64_t input_origin, int64_t target_dataset,
                                  const LabelUniverse& universe,
                                  const Classifier& classifier,
                                  const std::optional<std::filesystem::path>& out =
                                      std::nullopt) {
  if (universe.n() < 2)
    throw std::invalid_argument("mask_probe: requires a jointly trained generator (n >= 2)");
  if (inputs.empty()) throw std::invalid_argument("mask_probe: no inputs");
  const DatasetSpec& ds = universe.datasets.at(target_dataset);
  std::vector<double> proper_mask(universe.n(), 0.0), wrong_mask(universe.n(), 0.0);
  proper_mask[target_dataset] = 1.0;
  wrong_mask[target_dataset == 0 ? 1 : 0] = 1.0;
  (void)input_origin;

  MaskProbeReport rep;
  std::vector<std::vector<double>> proper_vectors, wrong_vectors;
  int64_t h = inputs[0].pixels.dim(1), w = inputs[0].pixels.dim(2);
  int64_t proper_err = 0, wrong_err = 0;
  for (const auto& rec : inputs) {
    Tensor batch({1, 3, h, w});
    std::copy(rec.pixels.data(), rec.pixels.data() + batch.numel(), batch.data());
    for (int64_t target = 0; target < ds.dim; ++target) {
      std::vector<double> one_hot(ds.dim, 0.0);
      one_hot[target] = 1.0;
      std::vector<double> pv =
          encode_with_mask_override(one_hot, target_dataset, proper_mask, universe);
      std::vector<double> wv =
          encode_with_mask_override(one_hot, target_dataset, wrong_mask, universe);
      Tensor proper_out = g.forward_raw(batch, {pv})->value;
      Tensor wrong_out = g.forward_raw(batch, {wv})->value;
      if (classifier(detail::slice_sample(proper_out, 0)) != target) ++proper_err;
      if (classifier(detail::slice_sample(wrong_out, 0)) != target) ++wrong_err;
      ++rep.n;
      if (proper_vectors.size() < static_cast<size_t>(ds.dim)) {
        proper_vectors.push_back(pv);
        wrong_vectors.push_back(wv);
      }
    }
  }
  rep.proper_error = static_cast<double>(proper_err) / rep.n;
  rep.wrong_error = static_cast<double>(wrong_err) / rep.n;
  if (out) {
    emit_grid(g, inputs, proper_vectors, out->string() + "_proper.png");
    emit_grid(g, inputs, wrong_vectors, out->string() + "_wrong.png");
  }
  return rep;
}

}  // namespace stargan

#endif  // STARGAN_EVAL_HPP_
