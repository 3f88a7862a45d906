#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ffcba/dataset.hpp"
#include "ffcba/rng.hpp"

using namespace ffcba;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ToyParams tiny_params() {
  ToyParams p;
  p.num_classes = 4;
  p.image_size = 16;
  p.channels = 3;
  p.seed = 5;
  return p;
}

}  // namespace

TEST_CASE("toy dataset has the requested shape and balanced labels") {
  Dataset ds = make_toy_dataset(tiny_params(), 12, 1);
  CHECK(ds.size() == 48);
  CHECK(ds.channels == 3);
  CHECK(ds.height == 16);
  CHECK(ds.num_classes == 4);
  auto by_class = ds.indices_by_class();
  for (const auto& idx : by_class) CHECK(idx.size() == 12);
  for (float f : ds.images) {
    CHECK(f >= 0.0f);
    CHECK(f <= 1.0f);
    // storage grid
    float scaled = f * 255.0f;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-4);
  }
}

TEST_CASE("toy dataset is deterministic per seed and distinct across streams") {
  Dataset a = make_toy_dataset(tiny_params(), 6, 1);
  Dataset b = make_toy_dataset(tiny_params(), 6, 1);
  CHECK(a.images == b.images);
  Dataset c = make_toy_dataset(tiny_params(), 6, 2);
  CHECK(a.images != c.images);
  ToyParams other = tiny_params();
  other.seed = 6;
  Dataset d = make_toy_dataset(other, 6, 1);
  CHECK(a.images != d.images);
}

TEST_CASE("ppm image files round-trip exactly") {
  Dataset ds = make_toy_dataset(tiny_params(), 2, 3);
  fs::path dir = temp_dir("ffcba_ppm_test");
  std::string path = (dir / "img.ppm").string();
  Tensor img = ds.image(5);
  save_image_file(img, path);
  Tensor back = load_image_file(path);
  CHECK(back.same_shape(img));
  CHECK(max_abs_diff(back, img) == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("pgm single-channel round-trip") {
  Tensor img(1, 1, 8, 8);
  Rng rng(9);
  for (auto& f : img.v)
    f = std::round(static_cast<float>(rng.uniform()) * 255.0f) / 255.0f;
  fs::path dir = temp_dir("ffcba_pgm_test");
  std::string path = (dir / "img.pgm").string();
  save_image_file(img, path);
  Tensor back = load_image_file(path);
  CHECK(max_abs_diff(back, img) == 0.0);
  fs::remove_all(dir);
}

TEST_CASE("class-directory persistence preserves samples grouped by class") {
  Dataset ds = make_toy_dataset(tiny_params(), 5, 4);
  fs::path dir = temp_dir("ffcba_classdirs_test");
  save_as_class_dirs(ds, dir.string());
  Dataset back = load_class_dirs(dir.string());
  CHECK(back.size() == ds.size());
  CHECK(back.num_classes == ds.num_classes);
  CHECK(back.channels == ds.channels);
  // reload is grouped by class; filenames carry the original global index
  int pos = 0;
  auto by_class = ds.indices_by_class();
  for (int k = 0; k < ds.num_classes; ++k)
    for (int i : by_class[k]) {
      CHECK(back.labels[pos] == ds.labels[i]);
      CHECK(max_abs_diff(back.image(pos), ds.image(i)) == 0.0);
      ++pos;
    }
  fs::remove_all(dir);
}

TEST_CASE("binary archive loader reads label-plus-planar records") {
  fs::path dir = temp_dir("ffcba_bin_test");
  std::string path = (dir / "batch.bin").string();
  const int c = 3, h = 4, w = 4;
  std::ofstream f(path, std::ios::binary);
  for (int rec = 0; rec < 5; ++rec) {
    unsigned char label = static_cast<unsigned char>(rec % 3);
    f.put(static_cast<char>(label));
    for (int i = 0; i < c * h * w; ++i)
      f.put(static_cast<char>((rec * 37 + i) % 256));
  }
  f.close();
  Dataset ds = load_binary_archive({path}, c, h, w, 3);
  CHECK(ds.size() == 5);
  CHECK(ds.labels[4] == 1);
  CHECK(ds.image(2).at(0, 0, 0, 0) == doctest::Approx((2 * 37) % 256 / 255.0));
  // truncated record count
  std::ofstream bad(path, std::ios::binary);
  bad.write("xyz", 3);
  bad.close();
  CHECK_THROWS_AS(load_binary_archive({path}, c, h, w, 3), IoError);
  CHECK_THROWS_AS(load_binary_archive({(dir / "missing.bin").string()}, c, h, w, 3),
                  IoError);
  fs::remove_all(dir);
}

TEST_CASE("center crop takes the middle window") {
  Dataset ds;
  ds.channels = 1;
  ds.height = 6;
  ds.width = 6;
  ds.num_classes = 2;
  ds.labels = {0};
  ds.images.resize(36);
  for (int i = 0; i < 36; ++i) ds.images[i] = i / 255.0f;
  Dataset cropped = center_crop(ds, 4, 4);
  CHECK(cropped.height == 4);
  CHECK(cropped.image(0).at(0, 0, 0, 0) == doctest::Approx(7 / 255.0));
  CHECK(cropped.image(0).at(0, 0, 3, 3) == doctest::Approx(28 / 255.0));
  CHECK_THROWS_AS(center_crop(ds, 8, 8), ValidationError);
}

TEST_CASE("subset selects rows and errors on bad indices") {
  Dataset ds = make_toy_dataset(tiny_params(), 3, 6);
  Dataset sub = subset(ds, {0, 5, 11});
  CHECK(sub.size() == 3);
  CHECK(sub.labels[1] == ds.labels[5]);
  CHECK(max_abs_diff(sub.image(2), ds.image(11)) == 0.0);
  CHECK_THROWS_AS(subset(ds, {99}), ValidationError);
}

TEST_CASE("loader rejects missing roots and malformed images") {
  CHECK_THROWS_AS(load_class_dirs("/nonexistent/ffcba"), IoError);
  fs::path dir = temp_dir("ffcba_badimg_test");
  fs::create_directories(dir / "class_a");
  std::ofstream f(dir / "class_a" / "bad.ppm", std::ios::binary);
  f << "P3\n4 4\n255\n";  // ASCII PPM is not supported
  f.close();
  CHECK_THROWS_AS(load_class_dirs(dir.string()), IoError);
  fs::remove_all(dir);
}
