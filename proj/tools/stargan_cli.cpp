// Command-line front end: make-synthetic, train, translate, evaluate,
// count-params. All commands are deterministic under (config, seed) and print
// the config hash they ran with.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stargan/config.hpp"
#include "stargan/eval.hpp"
#include "stargan/trainer.hpp"

namespace fs = std::filesystem;
using namespace stargan;

namespace {

// Relative output paths are rooted at $STARGAN_OUT_ROOT when set.
fs::path resolve_out(const fs::path& p) {
  if (p.is_absolute()) return p;
  const char* root = std::getenv("STARGAN_OUT_ROOT");
  return root ? fs::path(root) / p : p;
}

void print_hash(const RunConfig& cfg) {
  std::printf("config hash: %016llx\n", static_cast<unsigned long long>(cfg.hash()));
}

std::pair<ImageSet, ImageSet> load_dataset(const RunConfig& cfg, int64_t i) {
  const auto& entry = cfg.datasets.at(i);
  RngStream rng = RngStream::substream(cfg.seed, "data-split-" + entry.spec.name);
  return load_annotated_folder(entry.root, entry.root / "annotations.txt", entry.spec,
                               cfg.prep, entry.holdout, rng);
}

// "name" or "name1+name2" -> (dataset index, per-dataset label vector)
std::pair<int64_t, std::vector<double>> compose_target(const std::string& names,
                                                       const LabelUniverse& u) {
  std::vector<std::string> parts;
  std::stringstream ss(names);
  for (std::string tok; std::getline(ss, tok, '+');) parts.push_back(tok);
  if (parts.empty()) throw std::invalid_argument("empty target");
  auto find = [&](const std::string& name) -> std::pair<int64_t, int64_t> {
    for (int64_t d = 0; d < u.n(); ++d) {
      const auto& ln = u.datasets[d].label_names;
      auto it = std::find(ln.begin(), ln.end(), name);
      if (it != ln.end()) return {d, it - ln.begin()};
    }
    std::string valid;
    for (const auto& ds : u.datasets)
      for (const auto& n : ds.label_names) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown domain name '" + name + "'; valid names: " + valid);
  };
  auto [origin, first] = find(parts[0]);
  std::vector<double> label(u.datasets[origin].dim, 0.0);
  label[first] = 1.0;
  for (size_t i = 1; i < parts.size(); ++i) {
    auto [d, j] = find(parts[i]);
    if (d != origin)
      throw std::invalid_argument("target names span multiple datasets: " + names);
    label[j] = 1.0;
  }
  if (u.datasets[origin].kind == LabelKind::categorical && parts.size() > 1)
    throw std::invalid_argument("categorical dataset takes exactly one target name");
  return {origin, label};
}

Classifier classifier_for(const RunConfig& cfg, int64_t dataset_index,
                          const ImageSet& train, std::shared_ptr<EvalClassifier>& keep,
                          double* accuracy, bool* trusted) {
  const auto& entry = cfg.datasets.at(dataset_index);
  if (fs::exists(entry.root / "oracle.json")) {
    auto oracle = std::make_shared<OracleSpec>(load_oracle(entry.root));
    *accuracy = 1.0;
    *trusted = true;
    return [oracle](const Tensor& img) { return oracle->classify(img); };
  }
  EvalClassifierConfig ccfg;
  ccfg.seed = cfg.seed;
  keep = std::make_shared<EvalClassifier>(train, entry.spec, ccfg);
  *accuracy = keep->accuracy();
  *trusted = keep->trusted();
  if (!keep->trusted())
    std::fprintf(stderr,
                 "warning: eval classifier accuracy %.4f below floor; report untrusted\n",
                 keep->accuracy());
  return keep->fn();
}

int cmd_make_synthetic(const RunConfig& cfg, const fs::path& out) {
  fs::path dir = resolve_out(out);
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw std::runtime_error("target directory exists and is not empty: " + dir.string());
  SyntheticResult r = make_synthetic(cfg.synthetic);
  write_synthetic_dataset(dir, r);
  std::printf("wrote %zu train + %zu test images to %s\n", r.train.size(), r.test.size(),
              dir.string().c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& resume) {
  cfg.validate();
  fs::path out = resolve_out(cfg.out_dir);
  fs::create_directories(out);
  std::vector<std::pair<ImageSet, ImageSet>> splits;
  std::vector<const ImageSet*> trains;
  for (int64_t i = 0; i < static_cast<int64_t>(cfg.datasets.size()); ++i) {
    splits.push_back(load_dataset(cfg, i));
    std::printf("dataset %s: %zu train / %zu test\n", cfg.datasets[i].spec.name.c_str(),
                splits.back().first.size(), splits.back().second.size());
  }
  for (const auto& s : splits) trains.push_back(&s.first);
  Trainer trainer(cfg.universe(), cfg.generator_spec(), cfg.discriminator_spec(),
                  cfg.losses, cfg.train, cfg.hash());
  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    std::printf("resumed from %s at epoch %lld step %lld\n", resume.c_str(),
                static_cast<long long>(trainer.epoch()),
                static_cast<long long>(trainer.step()));
  }
  trainer.train(trains, out);
  write_loss_log(out / "loss.csv", trainer.log());
  std::printf("finished %lld steps; checkpoint and loss log in %s\n",
              static_cast<long long>(trainer.step()), out.string().c_str());
  return 0;
}

int cmd_translate(const RunConfig& cfg, const std::string& checkpoint,
                  const std::vector<std::string>& input_files, const std::string& target,
                  const std::string& mask_dataset, const fs::path& out) {
  cfg.validate();
  LabelUniverse u = cfg.universe();
  Trainer trainer(u, cfg.generator_spec(), cfg.discriminator_spec(), cfg.losses, cfg.train,
                  cfg.hash());
  trainer.load_checkpoint(checkpoint);
  auto [origin, label] = compose_target(target, u);
  std::vector<double> unified;
  if (u.has_mask()) {
    std::vector<double> mask(u.n(), 0.0);
    mask[mask_dataset.empty() ? origin : u.index_of(mask_dataset)] = 1.0;
    unified = encode_with_mask_override(label, origin, mask, u);
  } else {
    unified = encode_unified(label, origin, u).values;
  }
  fs::path dir = resolve_out(out);
  fs::create_directories(dir);
  for (const auto& file : input_files) {
    cv::Mat img = cv::imread(file, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("cannot read input image " + file);
    Tensor t = tensor_from_mat(preprocess_mat(img, cfg.prep));
    Tensor batch({1, 3, t.dim(1), t.dim(2)});
    std::copy(t.data(), t.data() + t.numel(), batch.data());
    Tensor out_img = trainer.generator().forward_raw(batch, {unified})->value;
    Tensor single({3, t.dim(1), t.dim(2)});
    std::copy(out_img.data(), out_img.data() + single.numel(), single.data());
    fs::path dst = dir / (fs::path(file).stem().string() + "_" + target + ".png");
    if (!cv::imwrite(dst.string(), mat_from_tensor(single)))
      throw std::runtime_error("cannot write " + dst.string());
    std::printf("wrote %s\n", dst.string().c_str());
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const fs::path& report_path) {
  cfg.validate();
  LabelUniverse u = cfg.universe();
  Trainer trainer(u, cfg.generator_spec(), cfg.discriminator_spec(), cfg.losses, cfg.train,
                  cfg.hash());
  if (!checkpoint.empty()) trainer.load_checkpoint(checkpoint);
  auto [train, test] = load_dataset(cfg, 0);
  if (test.empty()) throw std::runtime_error("evaluate: dataset 0 has no holdout rows");

  std::shared_ptr<EvalClassifier> keep;
  double acc = 0.0;
  bool trusted = false;
  Classifier clf = classifier_for(cfg, 0, train, keep, &acc, &trusted);
  EvalReport r = classification_error_of_translations(trainer.generator(), test, 0, u, clf);
  EvalReport pr = param_report(cfg.generator_spec(), cfg.discriminator_spec(),
                               cfg.image_size, cfg.image_size);
  r.params_generator = pr.params_generator;
  r.params_discriminator = pr.params_discriminator;
  r.params_total = pr.params_total;
  r.classifier_accuracy = acc;
  r.classifier_trusted = trusted;
  double rec = cycle_reconstruction_l1(trainer.generator(), test, 0, u);

  fs::path out = resolve_out(report_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  nlohmann::json j = r.to_json();
  j["cycle_reconstruction_l1"] = rec;
  std::ofstream(out) << j.dump(2) << "\n";

  fs::path md = out;
  md.replace_extension(".md");
  std::ofstream summary(md);
  summary << "| method | classification error | cycle L1 | parameters |\n"
          << "|---|---|---|---|\n"
          << "| this run | " << r.classification_error << " | " << rec << " | "
          << r.params_total << " |\n";
  std::printf("classification error %.4f, cycle L1 %.4f (report: %s)\n",
              r.classification_error, rec, out.string().c_str());
  return 0;
}

int cmd_count_params(const RunConfig& cfg, const std::string& g_arch,
                     const std::string& d_arch, double reference) {
  NetworkSpec g = cfg.generator_spec();
  NetworkSpec d = cfg.discriminator_spec();
  auto read_file = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open architecture file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (!g_arch.empty()) g = parse_spec(read_file(g_arch));
  if (!d_arch.empty()) d = parse_spec(read_file(d_arch));
  EvalReport r = param_report(g, d, cfg.image_size, cfg.image_size);
  std::printf("| network | parameters |\n|---|---|\n");
  std::printf("| generator | %lld |\n", static_cast<long long>(r.params_generator));
  std::printf("| discriminator | %lld |\n", static_cast<long long>(r.params_discriminator));
  std::printf("| total | %lld |\n", static_cast<long long>(r.params_total));
  if (reference > 0) {
    double rel = std::fabs(static_cast<double>(r.params_total) - reference) / reference;
    std::printf("reference %.0f, relative difference %.4f%%\n", reference, rel * 100.0);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-domain image-to-image translation"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run configuration (JSON)")->required();

  auto* mk = app.add_subcommand("make-synthetic", "generate a synthetic corpus");
  std::string mk_out;
  mk->add_option("--out", mk_out, "target directory (default: dataset 0 root)");

  auto* tr = app.add_subcommand("train", "train the generator/discriminator pair");
  std::string resume;
  tr->add_option("--resume", resume, "checkpoint to resume from");

  auto* xl = app.add_subcommand("translate", "translate images to a target domain");
  std::string xl_ckpt, xl_target, xl_mask, xl_out = "translated";
  std::vector<std::string> xl_inputs;
  xl->add_option("--checkpoint", xl_ckpt)->required();
  xl->add_option("--input", xl_inputs, "input image files")->required();
  xl->add_option("--target", xl_target, "domain name, or name1+name2")->required();
  xl->add_option("--mask", xl_mask, "dataset whose mask bit to set (probe mode)");
  xl->add_option("--out", xl_out, "output directory");

  auto* ev = app.add_subcommand("evaluate", "classifier-error evaluation protocol");
  std::string ev_ckpt, ev_report = "report.json";
  ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint (omit for untrained)");
  ev->add_option("--report", ev_report, "output report path");

  auto* cp = app.add_subcommand("count-params", "analytic parameter count");
  std::string cp_g, cp_d;
  double cp_ref = 0.0;
  cp->add_option("--generator-arch", cp_g, "architecture file overriding the config");
  cp->add_option("--discriminator-arch", cp_d, "architecture file overriding the config");
  cp->add_option("--reference", cp_ref, "reference total for comparison");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = RunConfig::load(config_path);
    print_hash(cfg);
    if (mk->parsed()) {
      fs::path out = mk_out.empty()
                         ? (cfg.datasets.empty() ? cfg.out_dir / "synthetic"
                                                 : cfg.datasets[0].root)
                         : fs::path(mk_out);
      return cmd_make_synthetic(cfg, out);
    }
    if (tr->parsed()) return cmd_train(cfg, resume);
    if (xl->parsed()) return cmd_translate(cfg, xl_ckpt, xl_inputs, xl_target, xl_mask, xl_out);
    if (ev->parsed()) return cmd_evaluate(cfg, ev_ckpt, ev_report);
    if (cp->parsed()) return cmd_count_params(cfg, cp_g, cp_d, cp_ref);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
