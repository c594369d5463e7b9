#ifndef STARGAN_DATA_HPP_
#define STARGAN_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json.hpp"
#include "stargan/labels.hpp"
#include "stargan/rng.hpp"
#include "stargan/tensor.hpp"

namespace stargan {

namespace fs = std::filesystem;

// ---- pixel normalization: u8 [0,255] <-> [-1,1] ----

inline double normalize_pixel(double v255) { return v255 / 127.5 - 1.0; }

inline double denormalize_pixel(double v) {
  double out = (v + 1.0) * 127.5;
  return std::clamp(out, 0.0, 255.0);
}

struct ImageRecord {
  Tensor pixels;              // (3, H, W), RGB, in [-1, 1]
  std::vector<double> label;  // per its DatasetSpec
  std::string source_path;
};

using ImageSet = std::vector<ImageRecord>;

struct PreprocessSpec {
  enum class Crop { center_square, none };
  Crop crop = Crop::none;
  int64_t crop_size = 0;  // 0 = min side when crop is center_square
  int64_t resize_to = 0;  // 0 = keep size

  void validate() const {
    if (resize_to != 0 && resize_to < 8)
      throw std::invalid_argument("PreprocessSpec: resize_to must be >= 8");
  }
};

// ---- cv::Mat <-> Tensor ----

inline Tensor tensor_from_mat(const cv::Mat& bgr) {
  Tensor t({3, bgr.rows, bgr.cols});
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      cv::Vec3b px = bgr.at<cv::Vec3b>(y, x);
      t[(0 * bgr.rows + y) * bgr.cols + x] = normalize_pixel(px[2]);  // R
      t[(1 * bgr.rows + y) * bgr.cols + x] = normalize_pixel(px[1]);  // G
      t[(2 * bgr.rows + y) * bgr.cols + x] = normalize_pixel(px[0]);  // B
    }
  return t;
}

inline cv::Mat mat_from_tensor(const Tensor& t) {
  int64_t h = t.dim(1), w = t.dim(2);
  cv::Mat bgr(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      auto q = [&](int64_t c) {
        return static_cast<uchar>(std::lround(denormalize_pixel(t[(c * h + y) * w + x])));
      };
      bgr.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x)) =
          cv::Vec3b(q(2), q(1), q(0));
    }
  return bgr;
}

inline cv::Mat preprocess_mat(cv::Mat img, const PreprocessSpec& prep) {
  prep.validate();
  if (prep.crop == PreprocessSpec::Crop::center_square) {
    int64_t side = prep.crop_size > 0 ? prep.crop_size : std::min(img.rows, img.cols);
    if (side > img.rows || side > img.cols)
      throw std::invalid_argument("preprocess: crop size exceeds image");
    int64_t y0 = (img.rows - side) / 2, x0 = (img.cols - side) / 2;
    img = img(cv::Rect(static_cast<int>(x0), static_cast<int>(y0),
                       static_cast<int>(side), static_cast<int>(side))).clone();
  }
  if (prep.resize_to > 0 && (img.rows != prep.resize_to || img.cols != prep.resize_to)) {
    cv::Mat resized;
    cv::resize(img, resized, cv::Size(static_cast<int>(prep.resize_to),
                                      static_cast<int>(prep.resize_to)),
               0, 0, cv::INTER_AREA);
    img = resized;
  }
  return img;
}

// ---- annotated folder ingestion ----
// annotations.txt: header line of attribute names, then `filename v1 v2 ...`
// with values in {-1,1} or {0,1}, both mapped to {0,1}.

inline std::pair<ImageSet, ImageSet> load_annotated_folder(
    const fs::path& root, const fs::path& annotation_file, const DatasetSpec& spec,
    const PreprocessSpec& prep, int64_t holdout_count, RngStream& rng) {
  spec.validate();
  std::ifstream in(annotation_file);
  if (!in) throw std::runtime_error("cannot open annotation file " + annotation_file.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::vector<std::string> columns;
  for (std::string tok; hs >> tok;) columns.push_back(tok);
  std::vector<int64_t> proj;
  for (const auto& name : spec.label_names) {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end())
      throw std::runtime_error("unknown attribute name '" + name + "' for dataset " +
                               spec.name);
    proj.push_back(it - columns.begin());
  }
  ImageSet all;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string fname;
    ls >> fname;
    std::vector<double> raw(columns.size());
    for (auto& v : raw) {
      if (!(ls >> v)) throw std::runtime_error("short annotation row for " + fname);
      if (v == -1.0) v = 0.0;
      if (v != 0.0 && v != 1.0)
        throw std::runtime_error("annotation value outside {-1,0,1} for " + fname);
    }
    fs::path img_path = root / "images" / fname;
    cv::Mat img = cv::imread(img_path.string(), cv::IMREAD_COLOR);
    if (img.empty())
      throw std::runtime_error("missing or unreadable image referenced by annotations: " +
                               img_path.string());
    ImageRecord rec;
    rec.pixels = tensor_from_mat(preprocess_mat(img, prep));
    for (int64_t j : proj) rec.label.push_back(raw[j]);
    rec.source_path = img_path.string();
    all.push_back(std::move(rec));
  }
  if (holdout_count < 0 || holdout_count > static_cast<int64_t>(all.size()))
    throw std::invalid_argument("holdout_count out of range");
  std::vector<int64_t> idx(all.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
  rng.shuffle(idx);
  ImageSet test, train;
  for (int64_t i = 0; i < static_cast<int64_t>(idx.size()); ++i) {
    (i < holdout_count ? test : train).push_back(std::move(all[idx[i]]));
  }
  return {std::move(train), std::move(test)};
}

// ---- synthetic corpus ----

enum class SyntheticKind { color_tint, brightness_band };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::color_tint;
  int64_t image_size = 16;
  int64_t n_domains = 3;
  int64_t train_per_domain = 90;
  int64_t test_per_domain = 30;
  double noise = 0.05;
  uint64_t seed = 0;

  void validate() const {
    if (image_size < 8) throw std::invalid_argument("SyntheticSpec: image_size >= 8");
    if (n_domains < 2) throw std::invalid_argument("SyntheticSpec: need >= 2 domains");
    if (kind == SyntheticKind::color_tint && n_domains > 3)
      throw std::invalid_argument("SyntheticSpec: color_tint supports up to 3 domains");
    if (train_per_domain < 1) throw std::invalid_argument("SyntheticSpec: n_samples >= 1");
    if (test_per_domain < 0) throw std::invalid_argument("SyntheticSpec: test_per_domain >= 0");
  }
};

// Closed-form labeler for synthetic corpora; serialized as oracle.json.
struct OracleSpec {
  std::string type;  // "channel_argmax" | "luminance_band"
  int64_t n_domains = 0;
  std::vector<double> thresholds;  // luminance_band: band edges in [-1,1] units

  int64_t classify(const Tensor& img) const {
    int64_t c = img.dim(0), hw = img.numel() / c;
    if (type == "channel_argmax") {
      int64_t best = 0;
      double best_mean = -1e30;
      for (int64_t ci = 0; ci < std::min<int64_t>(c, n_domains); ++ci) {
        double m = 0.0;
        for (int64_t j = 0; j < hw; ++j) m += img[ci * hw + j];
        if (m > best_mean) {
          best_mean = m;
          best = ci;
        }
      }
      return best;
    }
    if (type == "luminance_band") {
      double m = img.sum() / img.numel();
      int64_t band = 0;
      for (double t : thresholds)
        if (m > t) ++band;
      return band;
    }
    throw std::runtime_error("unknown oracle type " + type);
  }

  nlohmann::json to_json() const {
    return {{"type", type}, {"n_domains", n_domains}, {"thresholds", thresholds}};
  }

  static OracleSpec from_json(const nlohmann::json& j) {
    OracleSpec o;
    o.type = j.at("type").get<std::string>();
    o.n_domains = j.at("n_domains").get<int64_t>();
    o.thresholds = j.at("thresholds").get<std::vector<double>>();
    return o;
  }
};

struct SyntheticResult {
  ImageSet train;
  ImageSet test;
  OracleSpec oracle;
  DatasetSpec dataset_spec;
};

namespace detail {

// Grayscale scene in [0,1]: background plus one random shape.
inline std::vector<double> synth_scene(int64_t size, RngStream& rng) {
  std::vector<double> scene(size * size);
  double bg = rng.uniform(0.35, 0.6);
  std::fill(scene.begin(), scene.end(), bg);
  double fgv = rng.bernoulli(0.5) ? rng.uniform(0.7, 0.95) : rng.uniform(0.1, 0.3);
  bool circle = rng.bernoulli(0.5);
  double cx = rng.uniform(0.25, 0.75) * size;
  double cy = rng.uniform(0.25, 0.75) * size;
  double r = rng.uniform(0.15, 0.3) * size;
  for (int64_t y = 0; y < size; ++y)
    for (int64_t x = 0; x < size; ++x) {
      bool inside;
      if (circle) {
        inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
      } else {
        inside = std::fabs(x - cx) <= r && std::fabs(y - cy) <= r;
      }
      if (inside) scene[y * size + x] = fgv;
    }
  return scene;
}

inline Tensor quantize_like_png(const Tensor& t) {
  Tensor out(t.shape());
  for (int64_t i = 0; i < t.numel(); ++i)
    out[i] = normalize_pixel(std::lround(denormalize_pixel(t[i])));
  return out;
}

}  // namespace detail

inline SyntheticResult make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  RngStream rng = RngStream::substream(spec.seed, "synthetic");
  SyntheticResult result;

  result.dataset_spec.kind = LabelKind::categorical;
  result.dataset_spec.dim = spec.n_domains;
  if (spec.kind == SyntheticKind::color_tint) {
    result.dataset_spec.name = "tint";
    const char* names[3] = {"tint_red", "tint_green", "tint_blue"};
    for (int64_t d = 0; d < spec.n_domains; ++d)
      result.dataset_spec.label_names.push_back(names[d]);
    result.oracle.type = "channel_argmax";
    result.oracle.n_domains = spec.n_domains;
  } else {
    result.dataset_spec.name = "brightness";
    for (int64_t d = 0; d < spec.n_domains; ++d)
      result.dataset_spec.label_names.push_back("bright_" + std::to_string(d));
    result.oracle.type = "luminance_band";
    result.oracle.n_domains = spec.n_domains;
    // bands evenly spaced in [-1,1] luminance, edges between band centers
    for (int64_t d = 0; d + 1 < spec.n_domains; ++d) {
      double c0 = -0.6 + 1.2 * d / (spec.n_domains - 1);
      double c1 = -0.6 + 1.2 * (d + 1) / (spec.n_domains - 1);
      result.oracle.thresholds.push_back((c0 + c1) / 2.0);
    }
  }
  result.dataset_spec.validate();

  int64_t size = spec.image_size;
  auto emit = [&](int64_t domain) {
    std::vector<double> scene = detail::synth_scene(size, rng);
    Tensor img({3, size, size});
    if (spec.kind == SyntheticKind::color_tint) {
      for (int64_t c = 0; c < 3; ++c) {
        double gain = (c == domain) ? 0.9 : 0.25;
        for (int64_t j = 0; j < size * size; ++j)
          img[c * size * size + j] = scene[j] * gain;
      }
    } else {
      double center = -0.6 + 1.2 * domain / (spec.n_domains - 1);
      double mu = (center + rng.uniform(-0.12, 0.12) + 1.0) / 2.0;  // to [0,1]
      double mean = 0.0;
      for (double v : scene) mean += v;
      mean /= scene.size();
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t j = 0; j < size * size; ++j)
          img[c * size * size + j] = 0.35 * (scene[j] - mean) + mu;
    }
    for (int64_t i = 0; i < img.numel(); ++i) {
      double v = img[i] + spec.noise * rng.normal();
      img[i] = std::clamp(v, 0.0, 1.0) * 2.0 - 1.0;  // [0,1] -> [-1,1]
    }
    ImageRecord rec;
    rec.pixels = detail::quantize_like_png(img);
    rec.label.assign(spec.n_domains, 0.0);
    rec.label[domain] = 1.0;
    return rec;
  };

  for (int64_t d = 0; d < spec.n_domains; ++d)
    for (int64_t i = 0; i < spec.train_per_domain; ++i) result.train.push_back(emit(d));
  for (int64_t d = 0; d < spec.n_domains; ++d)
    for (int64_t i = 0; i < spec.test_per_domain; ++i) result.test.push_back(emit(d));
  return result;
}

// Writes root/images/*.png, root/annotations.txt and root/oracle.json.
// Train rows come first; the test rows are flagged in a third section column.
inline void write_synthetic_dataset(const fs::path& root, const SyntheticResult& result) {
  fs::create_directories(root / "images");
  std::ofstream ann(root / "annotations.txt");
  for (int64_t j = 0; j < result.dataset_spec.dim; ++j) {
    if (j) ann << ' ';
    ann << result.dataset_spec.label_names[j];
  }
  ann << " is_test\n";
  int64_t counter = 0;
  auto write_set = [&](const ImageSet& set, int is_test) {
    for (const auto& rec : set) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(counter++));
      cv::imwrite((root / "images" / name).string(), mat_from_tensor(rec.pixels));
      ann << name;
      for (double v : rec.label) ann << ' ' << v;
      ann << ' ' << is_test << '\n';
    }
  };
  write_set(result.train, 0);
  write_set(result.test, 1);
  std::ofstream oj(root / "oracle.json");
  oj << result.oracle.to_json().dump(2) << "\n";
}

inline OracleSpec load_oracle(const fs::path& root) {
  std::ifstream in(root / "oracle.json");
  if (!in) throw std::runtime_error("missing oracle.json under " + root.string());
  nlohmann::json j;
  in >> j;
  return OracleSpec::from_json(j);
}

// ---- batching ----

// Epoch-shuffled fixed-size batches of record indices; the last partial batch
// is dropped. Deterministic given the rng state.
inline std::vector<std::vector<int64_t>> epoch_batches(int64_t n, int64_t batch_size,
                                                       RngStream& rng) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (batch_size > n) throw std::invalid_argument("batch_size exceeds dataset size");
  std::vector<int64_t> idx(n);
  for (int64_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<int64_t>> batches;
  for (int64_t b = 0; b + batch_size <= n; b += batch_size)
    batches.emplace_back(idx.begin() + b, idx.begin() + b + batch_size);
  return batches;
}

inline Tensor stack_images(const ImageSet& set, const std::vector<int64_t>& idx) {
  const Tensor& first = set[idx[0]].pixels;
  Tensor out({static_cast<int64_t>(idx.size()), first.dim(0), first.dim(1), first.dim(2)});
  int64_t per = first.numel();
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(set[idx[i]].pixels.data(), set[idx[i]].pixels.data() + per,
              out.data() + i * per);
  return out;
}

}  // namespace stargan

#endif  // STARGAN_DATA_HPP_
