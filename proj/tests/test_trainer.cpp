#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "stargan/trainer.hpp"

using namespace stargan;
namespace fs = std::filesystem;

namespace {

LabelUniverse tiny_universe() {
  LabelUniverse u;
  u.datasets.push_back({"tint", LabelKind::categorical, 3,
                        {"tint_red", "tint_green", "tint_blue"}});
  return u;
}

SyntheticResult tiny_corpus(uint64_t seed, int64_t per_domain = 8, int64_t size = 8) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::color_tint;
  spec.image_size = size;
  spec.n_domains = 3;
  spec.train_per_domain = per_domain;
  spec.test_per_domain = 0;
  spec.noise = 0.05;
  spec.seed = seed;
  return make_synthetic(spec);
}

Trainer tiny_trainer(const LabelUniverse& u, TrainConfig cfg, uint64_t hash = 0) {
  NetworkSpec g = stargan_generator_spec(u.unified_dim(), 0.125, 1);
  NetworkSpec d = stargan_discriminator_spec(8, 8, u.total_label_dim(), 0.125);
  return Trainer(u, g, d, LossConfig{}, cfg, hash);
}

std::vector<Tensor> snapshot(const std::vector<ad::Var>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p->value);
  return out;
}

bool same_params(const std::vector<Tensor>& a, const std::vector<ad::Var>& b) {
  for (size_t i = 0; i < a.size(); ++i)
    for (int64_t j = 0; j < a[i].numel(); ++j)
      if (a[i][j] != b[i]->value[j]) return false;
  return true;
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("stargan_trainer_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("lr schedule: flat then linear decay to zero") {
  TrainConfig cfg;
  cfg.warm_epochs = 10;
  cfg.decay_epochs = 10;
  CHECK(lr_at(0, cfg) == 1e-4);
  CHECK(lr_at(5, cfg) == 1e-4);
  CHECK(lr_at(9.99, cfg) == 1e-4);
  CHECK(lr_at(15, cfg) == doctest::Approx(5e-5).epsilon(1e-12));
  CHECK(lr_at(20, cfg) == 0.0);
  CHECK(lr_at(25, cfg) == 0.0);
  CHECK(lr_at(12.5, cfg) == doctest::Approx(7.5e-5).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at(-1, cfg), std::invalid_argument);
  TrainConfig nodecay;
  nodecay.warm_epochs = 2;
  nodecay.decay_epochs = 0;
  CHECK(lr_at(1.5, nodecay) == nodecay.lr);
  CHECK(lr_at(2.0, nodecay) == 0.0);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.n_critic = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.flip_prob = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.warm_epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("flip augmentation is an involution") {
  SyntheticResult r = tiny_corpus(1, 1);
  const Tensor& img = r.train[0].pixels;
  Tensor once = flip_horizontal(img);
  Tensor twice = flip_horizontal(once);
  bool changed = false;
  for (int64_t i = 0; i < img.numel(); ++i) {
    if (once[i] != img[i]) changed = true;
    CHECK(twice[i] == img[i]);
  }
  CHECK(changed);
}

TEST_CASE("n_critic counting and parameter freeze") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(2, 4);
  TrainConfig cfg;
  cfg.n_critic = 5;
  cfg.batch_size = 4;
  cfg.seed = 3;
  Trainer t = tiny_trainer(u, cfg);

  RngStream brng = RngStream::substream(9, "batch");
  int g_updates = 0;
  for (int call = 1; call <= 10; ++call) {
    auto batch = epoch_batches(static_cast<int64_t>(r.train.size()), 4, brng)[0];
    auto [images, labels] = t.assemble_batch(r.train, batch, 0);
    std::vector<Tensor> g_before = snapshot(t.generator().net().params());
    std::vector<Tensor> d_before = snapshot(t.discriminator().net().params());
    StepResult sr = t.train_step(images, labels, cfg.lr);
    CHECK(!same_params(d_before, t.discriminator().net().params()));
    if (sr.g_updated) {
      ++g_updates;
      CHECK(!same_params(g_before, t.generator().net().params()));
    } else {
      CHECK(same_params(g_before, t.generator().net().params()));
    }
    CHECK(sr.g_updated == (call % 5 == 0));
  }
  CHECK(g_updates == 2);
  CHECK(t.step() == 10);
}

TEST_CASE("training loop step arithmetic and log layout") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(4, 6);  // 18 records
  TrainConfig cfg;
  cfg.n_critic = 5;
  cfg.batch_size = 4;  // 4 batches/epoch
  cfg.warm_epochs = 2;
  cfg.decay_epochs = 0;
  cfg.seed = 5;
  Trainer t = tiny_trainer(u, cfg);
  t.train({&r.train});
  // 4 batches/epoch * 2 epochs = 8 D steps, G at step 5 only
  CHECK(t.step() == 8);
  int d_rows = 0, g_rows = 0;
  for (const auto& row : t.log()) {
    if (row.net == 'D') ++d_rows;
    if (row.net == 'G') {
      ++g_rows;
      CHECK(row.step == 5);
    }
  }
  CHECK(d_rows == 8);
  CHECK(g_rows == 1);

  fs::path dir = temp_dir("log");
  write_loss_log(dir / "loss.csv", t.log());
  std::ifstream in(dir / "loss.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step, net, adv, cls, rec, gp, total, lr");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 9);
}

TEST_CASE("dataset validation before any step") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(6, 2);
  TrainConfig cfg;
  cfg.warm_epochs = 1;
  cfg.decay_epochs = 0;
  cfg.batch_size = 2;
  Trainer t = tiny_trainer(u, cfg);
  ImageSet bad = r.train;
  bad[0].label = {1.0, 1.0, 0.0};  // not one-hot
  CHECK_THROWS_AS(t.train({&bad}), std::invalid_argument);
  CHECK(t.step() == 0);
  CHECK_THROWS_AS(t.train({&r.train, &r.train}), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(7, 2);
  TrainConfig cfg;
  cfg.batch_size = 2;
  Trainer t = tiny_trainer(u, cfg);
  auto [images, labels] = t.assemble_batch(r.train, {0, 1}, 0);
  images[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(t.train_step(images, labels, cfg.lr),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("determinism: identical config and seed give identical logs") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(8, 4);
  TrainConfig cfg;
  cfg.warm_epochs = 1;
  cfg.decay_epochs = 1;
  cfg.batch_size = 4;
  cfg.n_critic = 3;
  cfg.seed = 21;
  Trainer a = tiny_trainer(u, cfg);
  Trainer b = tiny_trainer(u, cfg);
  a.train({&r.train});
  b.train({&r.train});
  REQUIRE(a.log().size() == b.log().size());
  for (size_t i = 0; i < a.log().size(); ++i) {
    CHECK(a.log()[i].step == b.log()[i].step);
    CHECK(a.log()[i].net == b.log()[i].net);
    CHECK(a.log()[i].loss.total == b.log()[i].loss.total);
    CHECK(a.log()[i].loss.adv == b.log()[i].loss.adv);
    CHECK(a.log()[i].lr == b.log()[i].lr);
  }
}

TEST_CASE("checkpoint resume reproduces the uninterrupted log suffix") {
  LabelUniverse u = tiny_universe();
  SyntheticResult r = tiny_corpus(9, 4);
  TrainConfig cfg;
  cfg.warm_epochs = 2;
  cfg.decay_epochs = 0;
  cfg.batch_size = 4;
  cfg.n_critic = 2;
  cfg.seed = 31;
  cfg.checkpoint_every_epochs = 1;
  fs::path dir = temp_dir("resume");

  Trainer full = tiny_trainer(u, cfg, 0xabcdef);
  full.train({&r.train}, dir);
  REQUIRE(fs::exists(dir / "checkpoint_epoch1.bin"));
  REQUIRE(fs::exists(dir / "checkpoint_final.bin"));

  Trainer resumed = tiny_trainer(u, cfg, 0xabcdef);
  resumed.load_checkpoint(dir / "checkpoint_epoch1.bin");
  CHECK(resumed.epoch() == 1);
  resumed.train({&r.train});
  size_t suffix = resumed.log().size();
  REQUIRE(suffix > 0);
  REQUIRE(full.log().size() > suffix);
  size_t off = full.log().size() - suffix;
  for (size_t i = 0; i < suffix; ++i) {
    CHECK(full.log()[off + i].step == resumed.log()[i].step);
    CHECK(full.log()[off + i].net == resumed.log()[i].net);
    CHECK(full.log()[off + i].loss.total == resumed.log()[i].loss.total);
    CHECK(full.log()[off + i].loss.adv == resumed.log()[i].loss.adv);
    CHECK(full.log()[off + i].loss.cls == resumed.log()[i].loss.cls);
    CHECK(full.log()[off + i].loss.gp == resumed.log()[i].loss.gp);
  }
  // resumed final params equal the uninterrupted run's bit-for-bit
  auto pf = full.generator().net().params();
  auto pr = resumed.generator().net().params();
  for (size_t i = 0; i < pf.size(); ++i)
    for (int64_t j = 0; j < pf[i]->value.numel(); ++j)
      CHECK(pf[i]->value[j] == pr[i]->value[j]);
}

TEST_CASE("checkpoint refuses config hash mismatch and junk files") {
  LabelUniverse u = tiny_universe();
  TrainConfig cfg;
  fs::path dir = temp_dir("hash");
  Trainer a = tiny_trainer(u, cfg, 111);
  a.save_checkpoint(dir / "ck.bin");
  Trainer b = tiny_trainer(u, cfg, 222);
  CHECK_THROWS_WITH_AS(b.load_checkpoint(dir / "ck.bin"),
                       doctest::Contains("hash mismatch"), std::runtime_error);
  std::ofstream(dir / "junk.bin") << "not a checkpoint at all";
  CHECK_THROWS_AS(b.load_checkpoint(dir / "junk.bin"), std::runtime_error);
  CHECK_THROWS_AS(b.load_checkpoint(dir / "missing.bin"), std::runtime_error);
}

TEST_CASE("joint batches never move the other dataset's cls-head channels") {
  LabelUniverse u;
  u.datasets.push_back({"tint", LabelKind::categorical, 3,
                        {"tint_red", "tint_green", "tint_blue"}});
  u.datasets.push_back({"bright", LabelKind::categorical, 2, {"bright_0", "bright_1"}});
  NetworkSpec g = stargan_generator_spec(u.unified_dim(), 0.125, 1);
  NetworkSpec d = stargan_discriminator_spec(8, 8, u.total_label_dim(), 0.125);
  TrainConfig cfg;
  cfg.batch_size = 2;
  Trainer t(u, g, d, LossConfig{}, cfg);

  SyntheticResult r = tiny_corpus(10, 2);
  auto [images, labels] = t.assemble_batch(r.train, {0, 3}, 0);  // origin = dataset 0

  // cls head weight/bias are the last two parameters; channels [3,5) belong
  // to the second dataset and must be untouched by a dataset-0 batch.
  auto params = t.discriminator().net().params();
  ad::Var cls_w = params[params.size() - 2];
  ad::Var cls_b = params[params.size() - 1];
  REQUIRE(cls_w->value.dim(0) == 5);
  int64_t per_out = cls_w->value.numel() / 5;
  std::vector<double> w_before(cls_w->value.data() + 3 * per_out,
                               cls_w->value.data() + 5 * per_out);
  double b3 = cls_b->value[3], b4 = cls_b->value[4];
  t.train_step(images, labels, cfg.lr);
  for (int64_t j = 0; j < 2 * per_out; ++j)
    CHECK(cls_w->value[3 * per_out + j] == w_before[j]);
  CHECK(cls_b->value[3] == b3);
  CHECK(cls_b->value[4] == b4);
}

TEST_CASE("reconstruction loss trends down over early epochs") {
  LabelUniverse u = tiny_universe();
  int ok = 0;
  for (uint64_t seed : {101, 202, 303}) {
    SyntheticResult r = tiny_corpus(seed, 6);
    TrainConfig cfg;
    cfg.warm_epochs = 3;
    cfg.decay_epochs = 0;
    cfg.batch_size = 6;
    cfg.n_critic = 1;
    cfg.lr = 5e-4;
    cfg.seed = seed;
    Trainer t = tiny_trainer(u, cfg);
    t.train({&r.train});
    std::vector<double> epoch_rec;
    std::vector<int> counts;
    for (const auto& row : t.log())
      if (row.net == 'G') {
        int64_t e = (row.step - 1) / 3;  // 3 batches per epoch
        if (e >= static_cast<int64_t>(epoch_rec.size())) {
          epoch_rec.resize(e + 1, 0.0);
          counts.resize(e + 1, 0);
        }
        epoch_rec[e] += row.loss.rec;
        ++counts[e];
      }
    REQUIRE(epoch_rec.size() == 3);
    if (epoch_rec.back() / counts.back() < epoch_rec.front() / counts.front()) ++ok;
  }
  CHECK(ok >= 2);
}
