#ifndef STARGAN_TRAINER_HPP_
#define STARGAN_TRAINER_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stargan/data.hpp"
#include "stargan/labels.hpp"
#include "stargan/losses.hpp"
#include "stargan/network.hpp"
#include "stargan/optimizer.hpp"

namespace stargan {

struct TrainConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lr = 1e-4;
  int64_t warm_epochs = 10;
  int64_t decay_epochs = 10;
  int64_t n_critic = 5;
  int64_t batch_size = 16;
  double flip_prob = 0.5;
  uint64_t seed = 0;
  enum class Alternation { single, round_robin };
  Alternation alternation = Alternation::single;
  int64_t checkpoint_every_epochs = 0;  // 0 = final checkpoint only

  void validate() const {
    if (n_critic < 1) throw std::invalid_argument("TrainConfig: n_critic >= 1");
    if (flip_prob < 0.0 || flip_prob > 1.0)
      throw std::invalid_argument("TrainConfig: flip_prob in [0,1]");
    if (warm_epochs < 0 || decay_epochs < 0)
      throw std::invalid_argument("TrainConfig: epoch counts >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1");
  }
};

// Flat lr through the warm epochs, then linear decay to 0.
inline double lr_at(double epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch >= 0");
  if (epoch < cfg.warm_epochs) return cfg.lr;
  double past = epoch - cfg.warm_epochs;
  if (cfg.decay_epochs == 0 || past >= cfg.decay_epochs) return 0.0;
  return cfg.lr * (1.0 - past / cfg.decay_epochs);
}

struct StepResult {
  LossBreakdown d;
  bool g_updated = false;
  LossBreakdown g;
};

struct TrainLogRow {
  int64_t step = 0;
  char net = 'D';
  LossBreakdown loss;
  double lr = 0.0;
};

inline void write_loss_log(const std::filesystem::path& path,
                           const std::vector<TrainLogRow>& rows) {
  std::ofstream out(path);
  out << "step, net, adv, cls, rec, gp, total, lr\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.step << ", " << r.net << ", " << r.loss.adv << ", " << r.loss.cls << ", "
        << r.loss.rec << ", " << r.loss.gp << ", " << r.loss.total << ", " << r.lr << "\n";
}

inline Tensor flip_horizontal(const Tensor& img) {
  int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out(img.shape());
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        out[(ci * h + y) * w + x] = img[(ci * h + y) * w + (w - 1 - x)];
  return out;
}

class Trainer {
 public:
  Trainer(LabelUniverse universe, const NetworkSpec& g_spec, const NetworkSpec& d_spec,
          LossConfig loss_cfg, TrainConfig cfg, uint64_t config_hash = 0)
      : universe_(std::move(universe)),
        loss_cfg_(loss_cfg),
        cfg_(cfg),
        config_hash_(config_hash),
        init_rng_(RngStream::substream(cfg.seed, "init")),
        data_rng_(RngStream::substream(cfg.seed, "data")),
        train_rng_(RngStream::substream(cfg.seed, "training")),
        g_(g_spec, init_rng_),
        d_(d_spec, init_rng_),
        opt_g_(g_.net().params(), cfg.beta1, cfg.beta2),
        opt_d_(d_.net().params(), cfg.beta1, cfg.beta2) {
    universe_.validate();
    loss_cfg_.validate();
    cfg_.validate();
  }

  Generator& generator() { return g_; }
  const Generator& generator() const { return g_; }
  Discriminator& discriminator() { return d_; }
  int64_t step() const { return step_; }
  int64_t epoch() const { return epoch_; }
  const std::vector<TrainLogRow>& log() const { return log_; }

  // One D update; every n_critic-th call also one G update.
  StepResult train_step(const Tensor& images, const std::vector<UnifiedLabel>& labels,
                        double lr) {
    std::vector<UnifiedLabel> targets = sample_target_labels(labels, train_rng_);
    ++step_;
    StepResult res;

    // ---- discriminator update (generator frozen: fake is detached) ----
    Tensor fake = g_.forward(images, targets)->value;
    auto [src_r, cls_r_logits] = d_.forward(images);
    auto [src_f, cls_f_ignored] = d_.forward(fake);
    (void)cls_f_ignored;
    ad::Var adv;
    double gp_value = 0.0;
    if (loss_cfg_.adv_variant == AdvVariant::wgan_gp) {
      auto [x_hat, eps] = interpolate(images, fake, train_rng_);
      (void)eps;
      ad::Var norms = critic_grad_norms(
          [this](const ad::Var& xh) { return d_.forward(xh).first; }, x_hat);
      adv = adv_loss_wgan_gp(src_r, src_f, norms, loss_cfg_);
      for (int64_t i = 0; i < norms->value.numel(); ++i) {
        double d = norms->value[i] - 1.0;
        gp_value += d * d;
      }
      gp_value *= loss_cfg_.lambda_gp / norms->value.numel();
    } else {
      adv = adv_loss_gan(ad::sigmoid(src_r), ad::sigmoid(src_f));
    }
    ad::Var cls_r = cls_loss(cls_r_logits, labels, universe_);
    ad::Var d_total = ad::add(ad::neg(adv), ad::scale(cls_r, loss_cfg_.lambda_cls));
    res.d = total_d_loss(adv->value.item(), cls_r->value.item(), gp_value, loss_cfg_);
    ensure_finite("D", res.d);
    opt_d_.step(ad::grad(d_total, opt_d_.params()), lr);

    // ---- generator update (discriminator frozen) ----
    if (step_ % cfg_.n_critic == 0) {
      ad::Var fake_v = g_.forward(images, targets);
      auto [src_fg, cls_fg] = d_.forward(fake_v);
      ad::Var adv_g;
      if (loss_cfg_.adv_variant == AdvVariant::wgan_gp)
        adv_g = ad::neg(ad::mean(src_fg));
      else
        adv_g = ad::mean(ad::log_(ad::add_scalar(ad::neg(ad::sigmoid(src_fg)), 1.0)));
      ad::Var cls_f = cls_loss(cls_fg, targets, universe_);
      ad::Var g_total = ad::add(adv_g, ad::scale(cls_f, loss_cfg_.lambda_cls));
      double rec_value = 0.0;
      if (loss_cfg_.lambda_rec > 0.0) {
        ad::Var x_rec = g_.forward(fake_v, labels);  // back to the original domain
        ad::Var rec = rec_loss(images, x_rec);
        g_total = ad::add(g_total, ad::scale(rec, loss_cfg_.lambda_rec));
        rec_value = rec->value.item();
      }
      res.g_updated = true;
      res.g = total_g_loss(adv_g->value.item(), cls_f->value.item(), rec_value, loss_cfg_);
      ensure_finite("G", res.g);
      opt_g_.step(ad::grad(g_total, opt_g_.params()), lr);
    }
    return res;
  }

  // datasets[i] belongs to universe.datasets[i]. Joint mode interleaves one
  // batch per dataset in turn; an epoch is the larger dataset's batch count
  // and smaller datasets cycle.
  void train(const std::vector<const ImageSet*>& datasets,
             const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt) {
    if (static_cast<int64_t>(datasets.size()) != universe_.n())
      throw std::invalid_argument("train: dataset count != universe size");
    if (cfg_.alternation == TrainConfig::Alternation::round_robin && universe_.n() < 2)
      throw std::invalid_argument("train: round_robin needs >= 2 datasets");
    if (cfg_.alternation == TrainConfig::Alternation::single && universe_.n() != 1)
      throw std::invalid_argument("train: single alternation needs exactly 1 dataset");
    for (int64_t d = 0; d < universe_.n(); ++d)
      for (const auto& rec : *datasets[d])
        if (!universe_.datasets[d].label_valid(rec.label))
          throw std::invalid_argument("train: record label invalid for dataset " +
                                      universe_.datasets[d].name);

    int64_t total_epochs = cfg_.warm_epochs + cfg_.decay_epochs;
    while (epoch_ < total_epochs) {
      std::vector<std::vector<std::vector<int64_t>>> per_ds;
      int64_t rounds = 0;
      for (const ImageSet* set : datasets) {
        per_ds.push_back(epoch_batches(static_cast<int64_t>(set->size()), cfg_.batch_size,
                                       data_rng_));
        rounds = std::max(rounds, static_cast<int64_t>(per_ds.back().size()));
      }
      for (int64_t r = 0; r < rounds; ++r) {
        double lr = lr_at(epoch_ + static_cast<double>(r) / rounds, cfg_);
        for (int64_t d = 0; d < universe_.n(); ++d) {
          const auto& batch = per_ds[d][r % per_ds[d].size()];
          auto [images, labels] = assemble_batch(*datasets[d], batch, d);
          StepResult sr = train_step(images, labels, lr);
          log_.push_back({step_, 'D', sr.d, lr});
          if (sr.g_updated) log_.push_back({step_, 'G', sr.g, lr});
        }
      }
      ++epoch_;
      if (checkpoint_dir && cfg_.checkpoint_every_epochs > 0 &&
          epoch_ % cfg_.checkpoint_every_epochs == 0 && epoch_ < total_epochs)
        save_checkpoint(*checkpoint_dir /
                        ("checkpoint_epoch" + std::to_string(epoch_) + ".bin"));
    }
    if (checkpoint_dir) save_checkpoint(*checkpoint_dir / "checkpoint_final.bin");
  }

  // ---- checkpointing ----

  void save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, 8);
    write_u64(out, config_hash_);
    write_i64(out, step_);
    write_i64(out, epoch_);
    write_string(out, data_rng_.serialize());
    write_string(out, train_rng_.serialize());
    for (const Adam* opt : {&opt_g_, &opt_d_}) {
      for (const auto& p : opt->params())
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  p->value.numel() * sizeof(double));
      opt->save(out);
    }
    if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
  }

  void load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != kMagic)
      throw std::runtime_error("not a checkpoint file: " + path.string());
    uint64_t hash = read_u64(in);
    if (hash != config_hash_)
      throw std::runtime_error("checkpoint config hash mismatch: refusing to resume");
    step_ = read_i64(in);
    epoch_ = read_i64(in);
    data_rng_.deserialize(read_string(in));
    train_rng_.deserialize(read_string(in));
    for (Adam* opt : {&opt_g_, &opt_d_}) {
      for (const auto& p : opt->params())
        in.read(reinterpret_cast<char*>(p->value.data()), p->value.numel() * sizeof(double));
      opt->load(in);
    }
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
  }

  std::pair<Tensor, std::vector<UnifiedLabel>> assemble_batch(const ImageSet& set,
                                                              const std::vector<int64_t>& idx,
                                                              int64_t origin) {
    std::vector<UnifiedLabel> labels;
    const Tensor& first = set[idx[0]].pixels;
    Tensor images({static_cast<int64_t>(idx.size()), first.dim(0), first.dim(1), first.dim(2)});
    int64_t per = first.numel();
    for (size_t i = 0; i < idx.size(); ++i) {
      Tensor img = set[idx[i]].pixels;
      if (train_rng_.bernoulli(cfg_.flip_prob)) img = flip_horizontal(img);
      std::copy(img.data(), img.data() + per, images.data() + i * per);
      labels.push_back(encode_unified(set[idx[i]].label, origin, universe_));
    }
    return {std::move(images), std::move(labels)};
  }

 private:
  static constexpr const char kMagic[9] = "SGCKPT1\n";

  void ensure_finite(const char* net, const LossBreakdown& b) const {
    for (double v : {b.adv, b.cls, b.rec, b.gp, b.total})
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite " << net << " loss at step " << step_ << ": adv=" << b.adv
           << " cls=" << b.cls << " rec=" << b.rec << " gp=" << b.gp
           << " total=" << b.total;
        throw std::runtime_error(os.str());
      }
  }

  static void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_i64(std::ostream& out, int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  static void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static int64_t read_i64(std::istream& in) {
    int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  }
  static std::string read_string(std::istream& in) {
    uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
  }

  LabelUniverse universe_;
  LossConfig loss_cfg_;
  TrainConfig cfg_;
  uint64_t config_hash_;
  RngStream init_rng_, data_rng_, train_rng_;
  Generator g_;
  Discriminator d_;
  Adam opt_g_, opt_d_;
  int64_t step_ = 0;
  int64_t epoch_ = 0;
  std::vector<TrainLogRow> log_;
};

}  // namespace stargan

#endif  // STARGAN_TRAINER_HPP_
