#ifndef STARGAN_CONFIG_HPP_
#define STARGAN_CONFIG_HPP_

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stargan/data.hpp"
#include "stargan/labels.hpp"
#include "stargan/losses.hpp"
#include "stargan/net_spec.hpp"
#include "stargan/trainer.hpp"

namespace stargan {

// One declarative config per run. All randomness flows from `seed` through
// named substreams (data, init, training, eval) so modules cannot perturb
// each other's streams.
struct RunConfig {
  uint64_t seed = 0;
  int64_t image_size = 16;

  struct DatasetEntry {
    DatasetSpec spec;
    std::filesystem::path root;
    int64_t holdout = 0;
  };
  std::vector<DatasetEntry> datasets;
  PreprocessSpec prep;

  double width_multiplier = 0.25;
  int64_t n_res = 2;
  std::optional<int64_t> disc_depth;

  LossConfig losses;
  TrainConfig train;
  SyntheticSpec synthetic;
  std::filesystem::path out_dir = "runs/default";

  LabelUniverse universe() const {
    LabelUniverse u;
    for (const auto& d : datasets) u.datasets.push_back(d.spec);
    return u;
  }

  NetworkSpec generator_spec() const {
    return stargan_generator_spec(universe().unified_dim(), width_multiplier, n_res);
  }

  NetworkSpec discriminator_spec() const {
    return stargan_discriminator_spec(image_size, image_size, universe().total_label_dim(),
                                      width_multiplier, disc_depth);
  }

  void validate() const {
    universe().validate();
    losses.validate();
    train.validate();
    prep.validate();
    if (image_size < 8) throw std::invalid_argument("RunConfig: image_size >= 8");
    if (width_multiplier <= 0) throw std::invalid_argument("RunConfig: width_multiplier > 0");
    if (n_res < 0) throw std::invalid_argument("RunConfig: n_res >= 0");
    for (const auto& d : datasets)
      if (d.holdout < 0) throw std::invalid_argument("RunConfig: holdout >= 0");
  }

  nlohmann::json to_json() const {
    nlohmann::json ds = nlohmann::json::array();
    for (const auto& d : datasets)
      ds.push_back({{"name", d.spec.name},
                    {"kind", d.spec.kind == LabelKind::categorical ? "categorical"
                                                                   : "binary_attributes"},
                    {"labels", d.spec.label_names},
                    {"root", d.root.string()},
                    {"holdout", d.holdout}});
    nlohmann::json j = {
        {"seed", seed},
        {"image_size", image_size},
        {"datasets", ds},
        {"preprocess",
         {{"crop", prep.crop == PreprocessSpec::Crop::center_square ? "center_square"
                                                                    : "none"},
          {"crop_size", prep.crop_size},
          {"resize_to", prep.resize_to}}},
        {"net",
         {{"width_multiplier", width_multiplier},
          {"n_res", n_res},
          {"disc_depth", disc_depth ? nlohmann::json(*disc_depth) : nlohmann::json()}}},
        {"losses",
         {{"lambda_cls", losses.lambda_cls},
          {"lambda_rec", losses.lambda_rec},
          {"lambda_gp", losses.lambda_gp},
          {"adv", losses.adv_variant == AdvVariant::wgan_gp ? "wgan_gp" : "gan"}}},
        {"train",
         {{"lr", train.lr},
          {"beta1", train.beta1},
          {"beta2", train.beta2},
          {"warm_epochs", train.warm_epochs},
          {"decay_epochs", train.decay_epochs},
          {"n_critic", train.n_critic},
          {"batch_size", train.batch_size},
          {"flip_prob", train.flip_prob},
          {"checkpoint_every_epochs", train.checkpoint_every_epochs}}},
        {"synthetic",
         {{"kind", synthetic.kind == SyntheticKind::color_tint ? "color_tint"
                                                               : "brightness_band"},
          {"image_size", synthetic.image_size},
          {"n_domains", synthetic.n_domains},
          {"train_per_domain", synthetic.train_per_domain},
          {"test_per_domain", synthetic.test_per_domain},
          {"noise", synthetic.noise}}},
        {"out_dir", out_dir.string()}};
    return j;
  }

  // FNV-1a over the canonicalized (key-sorted, minified) dump.
  uint64_t hash() const {
    std::string text = to_json().dump();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.seed = j.value("seed", 0ull);
    c.image_size = j.value("image_size", int64_t{16});
    for (const auto& d : j.value("datasets", nlohmann::json::array())) {
      DatasetEntry e;
      e.spec.name = d.at("name").get<std::string>();
      std::string kind = d.value("kind", "categorical");
      if (kind == "categorical")
        e.spec.kind = LabelKind::categorical;
      else if (kind == "binary_attributes")
        e.spec.kind = LabelKind::binary_attributes;
      else
        throw std::invalid_argument("config: unknown label kind " + kind);
      e.spec.label_names = d.at("labels").get<std::vector<std::string>>();
      e.spec.dim = static_cast<int64_t>(e.spec.label_names.size());
      e.root = d.value("root", std::string{});
      e.holdout = d.value("holdout", int64_t{0});
      c.datasets.push_back(std::move(e));
    }
    if (j.contains("preprocess")) {
      const auto& p = j["preprocess"];
      std::string crop = p.value("crop", "none");
      if (crop == "center_square")
        c.prep.crop = PreprocessSpec::Crop::center_square;
      else if (crop == "none")
        c.prep.crop = PreprocessSpec::Crop::none;
      else
        throw std::invalid_argument("config: unknown crop mode " + crop);
      c.prep.crop_size = p.value("crop_size", int64_t{0});
      c.prep.resize_to = p.value("resize_to", int64_t{0});
    }
    if (j.contains("net")) {
      const auto& n = j["net"];
      c.width_multiplier = n.value("width_multiplier", 0.25);
      c.n_res = n.value("n_res", int64_t{2});
      if (n.contains("disc_depth") && !n["disc_depth"].is_null())
        c.disc_depth = n["disc_depth"].get<int64_t>();
    }
    if (j.contains("losses")) {
      const auto& l = j["losses"];
      c.losses.lambda_cls = l.value("lambda_cls", 1.0);
      c.losses.lambda_rec = l.value("lambda_rec", 10.0);
      c.losses.lambda_gp = l.value("lambda_gp", 10.0);
      std::string adv = l.value("adv", "wgan_gp");
      if (adv == "wgan_gp")
        c.losses.adv_variant = AdvVariant::wgan_gp;
      else if (adv == "gan")
        c.losses.adv_variant = AdvVariant::gan;
      else
        throw std::invalid_argument("config: unknown adv variant " + adv);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.lr = t.value("lr", 1e-4);
      c.train.beta1 = t.value("beta1", 0.5);
      c.train.beta2 = t.value("beta2", 0.999);
      c.train.warm_epochs = t.value("warm_epochs", int64_t{10});
      c.train.decay_epochs = t.value("decay_epochs", int64_t{10});
      c.train.n_critic = t.value("n_critic", int64_t{5});
      c.train.batch_size = t.value("batch_size", int64_t{16});
      c.train.flip_prob = t.value("flip_prob", 0.5);
      c.train.checkpoint_every_epochs = t.value("checkpoint_every_epochs", int64_t{0});
    }
    c.train.seed = c.seed;
    c.train.alternation = c.datasets.size() >= 2 ? TrainConfig::Alternation::round_robin
                                                 : TrainConfig::Alternation::single;
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      std::string kind = s.value("kind", "color_tint");
      if (kind == "color_tint")
        c.synthetic.kind = SyntheticKind::color_tint;
      else if (kind == "brightness_band")
        c.synthetic.kind = SyntheticKind::brightness_band;
      else
        throw std::invalid_argument("config: unknown synthetic kind " + kind);
      c.synthetic.image_size = s.value("image_size", int64_t{16});
      c.synthetic.n_domains = s.value("n_domains", int64_t{3});
      c.synthetic.train_per_domain = s.value("train_per_domain", int64_t{90});
      c.synthetic.test_per_domain = s.value("test_per_domain", int64_t{30});
      c.synthetic.noise = s.value("noise", 0.05);
    }
    c.synthetic.seed = c.seed;
    c.out_dir = j.value("out_dir", std::string{"runs/default"});
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

}  // namespace stargan

#endif  // STARGAN_CONFIG_HPP_
