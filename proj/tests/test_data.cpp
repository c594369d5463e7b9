#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "stargan/data.hpp"

using namespace stargan;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("stargan_data_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("normalization round trip within 1/255") {
  for (int v = 0; v <= 255; ++v) {
    double n = normalize_pixel(v);
    CHECK(n >= -1.0);
    CHECK(n <= 1.0);
    CHECK(std::fabs(denormalize_pixel(n) - v) < 1.0 / 255.0);
  }
  CHECK(denormalize_pixel(-2.0) == 0.0);
  CHECK(denormalize_pixel(2.0) == 255.0);
}

TEST_CASE("synthetic tint corpus has exact oracle labels") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::color_tint;
  spec.image_size = 16;
  spec.n_domains = 3;
  spec.train_per_domain = 50;
  spec.test_per_domain = 10;
  spec.noise = 0.0;
  spec.seed = 7;
  SyntheticResult r = make_synthetic(spec);
  CHECK(r.train.size() == 150);
  CHECK(r.test.size() == 30);
  CHECK(r.dataset_spec.dim == 3);
  for (const auto& rec : r.train) {
    CHECK(r.dataset_spec.label_valid(rec.label));
    CHECK(rec.pixels.min() >= -1.0);
    CHECK(rec.pixels.max() <= 1.0);
    int64_t want = std::find(rec.label.begin(), rec.label.end(), 1.0) - rec.label.begin();
    CHECK(r.oracle.classify(rec.pixels) == want);
  }
}

TEST_CASE("synthetic noisy corpus keeps oracle accuracy >= 0.99") {
  for (SyntheticKind kind : {SyntheticKind::color_tint, SyntheticKind::brightness_band}) {
    SyntheticSpec spec;
    spec.kind = kind;
    spec.image_size = 16;
    spec.n_domains = 3;
    spec.train_per_domain = 334;
    spec.test_per_domain = 0;
    spec.noise = 0.1;
    spec.seed = 11;
    SyntheticResult r = make_synthetic(spec);
    int64_t correct = 0;
    for (const auto& rec : r.train) {
      int64_t want = std::find(rec.label.begin(), rec.label.end(), 1.0) - rec.label.begin();
      if (r.oracle.classify(rec.pixels) == want) ++correct;
    }
    CHECK(static_cast<double>(correct) / r.train.size() >= 0.99);
  }
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.n_domains = 1;
  CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
  spec.n_domains = 3;
  spec.train_per_domain = 0;
  CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
  spec.train_per_domain = 1;
  spec.image_size = 4;
  CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
  spec.image_size = 16;
  spec.kind = SyntheticKind::color_tint;
  spec.n_domains = 4;
  CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
}

TEST_CASE("synthetic corpus is deterministic under seed") {
  SyntheticSpec spec;
  spec.train_per_domain = 5;
  spec.test_per_domain = 2;
  spec.seed = 42;
  SyntheticResult a = make_synthetic(spec);
  SyntheticResult b = make_synthetic(spec);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i)
    for (int64_t j = 0; j < a.train[i].pixels.numel(); ++j)
      CHECK(a.train[i].pixels[j] == b.train[i].pixels[j]);
}

TEST_CASE("write then load round-trips pixels and labels") {
  SyntheticSpec spec;
  spec.image_size = 12;
  spec.train_per_domain = 4;
  spec.test_per_domain = 2;
  spec.noise = 0.05;
  spec.seed = 3;
  SyntheticResult r = make_synthetic(spec);
  fs::path root = temp_dir("roundtrip");
  write_synthetic_dataset(root, r);
  CHECK(fs::exists(root / "oracle.json"));
  int64_t n_files = std::distance(fs::directory_iterator(root / "images"), fs::directory_iterator{});
  CHECK(n_files == 18);

  OracleSpec oracle = load_oracle(root);
  CHECK(oracle.type == r.oracle.type);
  CHECK(oracle.n_domains == r.oracle.n_domains);

  PreprocessSpec prep;  // no crop/resize: sizes already match
  RngStream rng = RngStream::substream(1, "split");
  auto [train, test] = load_annotated_folder(root, root / "annotations.txt",
                                             r.dataset_spec, prep, 0, rng);
  CHECK(train.size() == 18);
  // every loaded record matches some emitted record bit-for-bit after u8 quantization
  auto all = r.train;
  all.insert(all.end(), r.test.begin(), r.test.end());
  for (const auto& rec : train) {
    bool found = false;
    for (const auto& src : all) {
      bool same = src.label == rec.label;
      for (int64_t j = 0; same && j < src.pixels.numel(); ++j)
        same = std::fabs(src.pixels[j] - rec.pixels[j]) < 1e-12;
      if (same) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("annotated folder split and error handling") {
  SyntheticSpec spec;
  spec.image_size = 10;
  spec.train_per_domain = 6;
  spec.test_per_domain = 0;
  spec.seed = 5;
  SyntheticResult r = make_synthetic(spec);
  fs::path root = temp_dir("split");
  write_synthetic_dataset(root, r);

  PreprocessSpec prep;
  SUBCASE("holdout split is disjoint and exhaustive") {
    RngStream rng = RngStream::substream(9, "split");
    auto [train, test] = load_annotated_folder(root, root / "annotations.txt",
                                               r.dataset_spec, prep, 5, rng);
    CHECK(train.size() == 13);
    CHECK(test.size() == 5);
    std::set<std::string> paths;
    for (const auto& rec : train) paths.insert(rec.source_path);
    for (const auto& rec : test) paths.insert(rec.source_path);
    CHECK(paths.size() == 18);
    // determinism of the split
    RngStream rng2 = RngStream::substream(9, "split");
    auto [train2, test2] = load_annotated_folder(root, root / "annotations.txt",
                                                 r.dataset_spec, prep, 5, rng2);
    for (size_t i = 0; i < test.size(); ++i) CHECK(test[i].source_path == test2[i].source_path);
  }
  SUBCASE("unknown attribute name rejected") {
    DatasetSpec bad = r.dataset_spec;
    bad.label_names[1] = "no_such_attribute";
    RngStream rng = RngStream::substream(9, "split");
    CHECK_THROWS_WITH_AS(
        load_annotated_folder(root, root / "annotations.txt", bad, prep, 0, rng),
        doctest::Contains("no_such_attribute"), std::runtime_error);
  }
  SUBCASE("missing image file rejected with filename") {
    std::ofstream ann(root / "bad.txt");
    ann << "tint_red tint_green tint_blue\nnope.png 1 0 0\n";
    ann.close();
    RngStream rng = RngStream::substream(9, "split");
    CHECK_THROWS_WITH_AS(load_annotated_folder(root, root / "bad.txt", r.dataset_spec,
                                               prep, 0, rng),
                         doctest::Contains("nope.png"), std::runtime_error);
  }
  SUBCASE("minus-one annotation values map to zero") {
    std::ofstream ann(root / "pm.txt");
    ann << "tint_red tint_green tint_blue\n000000.png 1 -1 -1\n";
    ann.close();
    DatasetSpec binspec = r.dataset_spec;
    binspec.kind = LabelKind::binary_attributes;
    RngStream rng = RngStream::substream(9, "split");
    auto [train, test] =
        load_annotated_folder(root, root / "pm.txt", binspec, prep, 0, rng);
    REQUIRE(train.size() == 1);
    CHECK(train[0].label == std::vector<double>{1.0, 0.0, 0.0});
  }
}

TEST_CASE("preprocessing crop and resize") {
  cv::Mat img(20, 30, CV_8UC3, cv::Scalar(10, 20, 30));
  img.at<cv::Vec3b>(10, 15) = cv::Vec3b(200, 100, 50);
  PreprocessSpec prep;
  prep.crop = PreprocessSpec::Crop::center_square;
  prep.resize_to = 10;
  cv::Mat out = preprocess_mat(img, prep);
  CHECK(out.rows == 10);
  CHECK(out.cols == 10);

  // idempotence on already-processed images
  PreprocessSpec same;
  same.resize_to = 10;
  cv::Mat again = preprocess_mat(out, same);
  CHECK(cv::countNonZero(cv::Mat(again != out).reshape(1)) == 0);

  PreprocessSpec bad;
  bad.resize_to = 4;
  CHECK_THROWS_AS(preprocess_mat(img, bad), std::invalid_argument);
  PreprocessSpec too_big;
  too_big.crop = PreprocessSpec::Crop::center_square;
  too_big.crop_size = 64;
  CHECK_THROWS_AS(preprocess_mat(img, too_big), std::invalid_argument);
}

TEST_CASE("tensor and mat conversions invert each other") {
  RngStream rng = RngStream::substream(4, "mat");
  Tensor t({3, 6, 5});
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = normalize_pixel(rng.uniform_int(256));
  cv::Mat m = mat_from_tensor(t);
  Tensor back = tensor_from_mat(m);
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == doctest::Approx(t[i]).epsilon(1e-12));
}

TEST_CASE("epoch batches") {
  RngStream rng = RngStream::substream(2, "batches");
  auto batches = epoch_batches(10, 4, rng);
  REQUIRE(batches.size() == 2);
  std::set<int64_t> seen;
  for (const auto& b : batches) {
    CHECK(b.size() == 4);
    for (int64_t i : b) seen.insert(i);
  }
  CHECK(seen.size() == 8);  // distinct; the 2 leftovers dropped

  RngStream r1 = RngStream::substream(2, "batches");
  RngStream r2 = RngStream::substream(2, "batches");
  CHECK(epoch_batches(10, 4, r1) == epoch_batches(10, 4, r2));

  CHECK_THROWS_AS(epoch_batches(3, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(epoch_batches(3, 0, rng), std::invalid_argument);
}

TEST_CASE("stack_images packs batches in index order") {
  SyntheticSpec spec;
  spec.image_size = 8;
  spec.train_per_domain = 2;
  spec.test_per_domain = 0;
  spec.seed = 6;
  SyntheticResult r = make_synthetic(spec);
  Tensor batch = stack_images(r.train, {3, 0});
  CHECK(batch.dim(0) == 2);
  CHECK(batch.dim(1) == 3);
  for (int64_t j = 0; j < r.train[3].pixels.numel(); ++j) {
    CHECK(batch[j] == r.train[3].pixels[j]);
    CHECK(batch[r.train[0].pixels.numel() + j] == r.train[0].pixels[j]);
  }
}
