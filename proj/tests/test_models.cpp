#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ffcba/models.hpp"
#include "ffcba/nn.hpp"
#include "ffcba/rng.hpp"

using namespace ffcba;
namespace fs = std::filesystem;

namespace {

Dataset toy(int classes, int per_class, int size, uint64_t seed, int channels = 3) {
  ToyParams p;
  p.num_classes = classes;
  p.image_size = size;
  p.channels = channels;
  p.seed = seed;
  return make_toy_dataset(p, per_class, 1);
}

Tensor random_images(int n, int c, int s, uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, c, s, s);
  for (auto& f : t.v) f = static_cast<float>(rng.uniform());
  return t;
}

// Zero the extractor's linear weights so every latent equals relu(bias),
// then pin the bias; gives a stub whose latent is a known constant.
void make_constant_latent_stub(ClassifierSplit& model, float bias_value) {
  auto params = model.extractor().params();
  for (auto* p : params) {
    if (p->name == "linear_w") p->value.zero();
    if (p->name == "linear_b")
      std::fill(p->value.v.begin(), p->value.v.end(), bias_value);
  }
}

}  // namespace

TEST_CASE("split consistency: full forward equals head of extractor exactly") {
  for (const auto& arch : {"cnn_a", "cnn_b", "mlp_tiny"}) {
    ClassifierSplit model = ClassifierSplit::build(arch, 3, 16, 5, 42);
    Tensor x = random_images(8, 3, 16, 7);
    Tensor full = model.forward(x, false);
    Tensor via_split = model.head_forward(model.features(x, false), false);
    CHECK(max_abs_diff(full, via_split) == 0.0);
    CHECK(full.c == 5);
  }
}

TEST_CASE("unknown architecture and bad inputs are rejected") {
  CHECK_THROWS_AS(ClassifierSplit::build("resnet152", 3, 16, 5, 1), ValidationError);
  CHECK_THROWS_AS(ClassifierSplit::build("cnn_a", 3, 16, 1, 1), ValidationError);
  Dataset empty;
  empty.num_classes = 2;
  CHECK_THROWS_AS(train_classifier(empty, "cnn_a", TrainConfig{}), ValidationError);
}

TEST_CASE("label out of range is rejected") {
  Dataset ds = toy(3, 4, 16, 11);
  ds.labels[0] = 7;
  CHECK_THROWS_AS(train_classifier(ds, "mlp_tiny", TrainConfig{}), ValidationError);
}

TEST_CASE("the reference optimizer recipe is accepted") {
  // momentum SGD, lr 0.001, momentum 0.9, x0.1 decay every 30 epochs
  TrainConfig cfg;
  cfg.optimizer = "sgd_momentum";
  cfg.lr = 0.001f;
  cfg.momentum = 0.9f;
  cfg.lr_decay = 0.1f;
  cfg.lr_decay_every = 30;
  cfg.epochs = 0;
  Dataset ds = toy(3, 2, 16, 12);
  CHECK_NOTHROW(train_classifier(ds, "mlp_tiny", cfg));
}

TEST_CASE("zero epochs returns the seed-pinned initialization") {
  Dataset ds = toy(3, 4, 16, 13);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 99;
  TrainedClassifier out = train_classifier(ds, "cnn_a", cfg);
  ClassifierSplit fresh = ClassifierSplit::build("cnn_a", 3, 16, 3, 99);
  CHECK(out.model.param_hash() == fresh.param_hash());
  CHECK(out.epoch_loss.empty());
}

TEST_CASE("desk-scale training fits the toy dataset (seeded reference run)") {
  // 500 samples, 10 classes, small CNN, 20 epochs
  Dataset ds = toy(10, 50, 16, 21);
  TrainConfig cfg;
  cfg.optimizer = "adam";
  cfg.lr = 0.002f;
  cfg.lr_decay = 0.5f;
  cfg.lr_decay_every = 10;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.seed = 31;
  TrainedClassifier out = train_classifier(ds, "cnn_a", cfg);
  CHECK(out.final_train_accuracy >= 0.95);
  // deterministic re-run
  TrainedClassifier again = train_classifier(ds, "cnn_a", cfg);
  CHECK(out.model.param_hash() == again.model.param_hash());
}

TEST_CASE("centroids: single-sample and repeated-sample classes") {
  Dataset ds = toy(3, 1, 16, 14);
  ClassifierSplit model = ClassifierSplit::build("mlp_tiny", 3, 16, 3, 5);
  model.set_frozen(true);
  FeatureCentroids cents = compute_centroids(model, ds);
  for (int k = 0; k < 3; ++k) {
    Tensor z = model.features(ds.image(ds.indices_by_class()[k][0]), false);
    CHECK(max_abs_diff(cents.row(k), z) < 1e-6);
  }

  // same sample repeated n times: centroid equals that latent
  Dataset rep2 = ds;
  rep2.num_classes = 2;
  rep2.labels = {0, 0, 1};
  rep2.set_image(1, ds.image(0));
  ClassifierSplit two = ClassifierSplit::build("mlp_tiny", 3, 16, 2, 5);
  two.set_frozen(true);
  FeatureCentroids c2 = compute_centroids(two, rep2);
  Tensor z0 = two.features(rep2.image(0), false);
  CHECK(max_abs_diff(c2.row(0), z0) < 1e-6);
}

TEST_CASE("centroids match a streaming-mean oracle within 1e-6") {
  Dataset ds = toy(3, 10, 16, 15);
  ClassifierSplit model = ClassifierSplit::build("cnn_a", 3, 16, 3, 6);
  model.set_frozen(true);
  FeatureCentroids cents = compute_centroids(model, ds);

  // oracle: running mean, one sample at a time
  int d = model.latent_dim();
  std::vector<std::vector<double>> mean(3, std::vector<double>(d, 0.0));
  std::vector<long> count(3, 0);
  for (int i = 0; i < ds.size(); ++i) {
    Tensor z = model.features(ds.image(i), false);
    int k = ds.labels[i];
    ++count[k];
    for (int j = 0; j < d; ++j)
      mean[k][j] += (z.v[j] - mean[k][j]) / count[k];
  }
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < d; ++j)
      CHECK(cents.centroids.at(k, j, 0, 0) ==
            doctest::Approx(mean[k][j]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("centroids reject missing classes and unfrozen extractors") {
  Dataset ds = toy(3, 4, 16, 16);
  ClassifierSplit model = ClassifierSplit::build("mlp_tiny", 3, 16, 3, 7);
  CHECK_THROWS_AS(compute_centroids(model, ds), ValidationError);  // not frozen
  model.set_frozen(true);
  Dataset missing = ds;
  for (auto& l : missing.labels)
    if (l == 2) l = 1;
  CHECK_THROWS_WITH_AS(compute_centroids(model, missing),
                       doctest::Contains("class 2"), ValidationError);
}

TEST_CASE("centroid shift follows a latent shift exactly (stub extractor)") {
  Dataset ds = toy(2, 5, 16, 17);
  ClassifierSplit model = ClassifierSplit::build("mlp_tiny", 3, 16, 2, 8);
  make_constant_latent_stub(model, 0.75f);
  model.set_frozen(true);
  FeatureCentroids before = compute_centroids(model, ds);
  Tensor latent = model.features(ds.image(0), false);
  CHECK(max_abs_diff(before.row(0), latent) == 0.0);
  CHECK(max_abs_diff(before.row(1), latent) == 0.0);

  make_constant_latent_stub(model, 1.25f);
  FeatureCentroids after = compute_centroids(model, ds);
  Tensor shifted = model.features(ds.image(0), false);
  CHECK(max_abs_diff(after.row(0), shifted) == 0.0);
  for (int j = 0; j < model.latent_dim(); ++j)
    CHECK(after.row(0).v[j] - before.row(0).v[j] == doctest::Approx(0.5f));
}

TEST_CASE("trigger generator solves output padding per resolution") {
  CHECK(TriggerGenerator::solve_output_padding(16) == std::array<int, 3>{0, 0, 0});
  CHECK(TriggerGenerator::solve_output_padding(20) == std::array<int, 3>{0, 2, 0});
  CHECK(TriggerGenerator::solve_output_padding(24) == std::array<int, 3>{1, 1, 0});
  CHECK_THROWS_WITH_AS(TriggerGenerator::solve_output_padding(32),
                       doctest::Contains("supported sizes"), ValidationError);
}

TEST_CASE("triggers match the image shape and respect the l-inf bound") {
  for (int size : {16, 20, 24}) {
    TriggerGenerator gen(3, size, 10, 80.0f / 255.0f, 1234 + size);
    Tensor images = random_images(4, 3, size, 99);
    std::vector<int> classes = {0, 3, 7, 9};
    Tensor t = gen.generate(images, classes, false);
    CHECK(t.n == 4);
    CHECK(t.c == 3);
    CHECK(t.h == size);
    CHECK(max_abs(t) <= 80.0 / 255.0 + 1e-7);
  }
}

TEST_CASE("trigger bound holds across random parameter draws (property)") {
  for (uint64_t seed = 0; seed < 12; ++seed) {
    TriggerGenerator gen(3, 16, 4, 0.2f, seed * 7919 + 3);
    Tensor images = random_images(3, 3, 16, seed + 100);
    Tensor t = gen.generate(images, {0, 1, 3}, false);
    CHECK(max_abs(t) <= 0.2 + 1e-7);
    // train mode too: batch statistics change the path, not the bound
    Tensor t2 = gen.generate(images, {0, 1, 3}, true);
    CHECK(max_abs(t2) <= 0.2 + 1e-7);
  }
}

TEST_CASE("zeroed final layer produces the zero trigger") {
  TriggerGenerator gen(3, 16, 4, 0.3f, 5);
  auto params = gen.params();
  // final ConvTranspose2d weight+bias are the last convt entries
  for (auto* p : params)
    if (p->name == "convt_w" || p->name == "convt_b") p->value.zero();
  // only the LAST transposed conv matters; zero them all for the stub
  Tensor t = gen.generate(random_images(2, 3, 16, 3), {0, 1}, false);
  CHECK(max_abs(t) == 0.0);
}

TEST_CASE("evaluation-mode generation is deterministic") {
  TriggerGenerator gen(3, 16, 4, 0.3f, 6);
  Tensor images = random_images(2, 3, 16, 4);
  Tensor a = gen.generate(images, {1, 2}, false);
  Tensor b = gen.generate(images, {1, 2}, false);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("generate_trigger validates the one-hot vector and image") {
  TriggerGenerator gen(3, 16, 4, 0.3f, 7);
  Tensor img = random_images(1, 3, 16, 5);
  CHECK_NOTHROW(generate_trigger(gen, img, {0.0f, 1.0f, 0.0f, 0.0f}));
  CHECK_THROWS_AS(generate_trigger(gen, img, {0.0f, 0.5f, 0.5f, 0.0f}),
                  ValidationError);
  CHECK_THROWS_AS(generate_trigger(gen, img, {0.0f, 1.0f, 1.0f, 0.0f}),
                  ValidationError);
  CHECK_THROWS_AS(generate_trigger(gen, img, {0.0f, 0.0f, 0.0f, 0.0f}),
                  ValidationError);
  CHECK_THROWS_AS(generate_trigger(gen, img, {1.0f, 0.0f}), ValidationError);
  Tensor wrong = random_images(1, 3, 24, 5);
  CHECK_THROWS_AS(generate_trigger(gen, wrong, {1.0f, 0.0f, 0.0f, 0.0f}),
                  ValidationError);
}

TEST_CASE("apply_trigger clamps and matches the scalar oracle") {
  Tensor img = random_images(1, 3, 16, 8);
  Tensor zero(1, 3, 16, 16);
  CHECK(max_abs_diff(apply_trigger(img, zero), img) == 0.0);

  Tensor ones = img;
  std::fill(ones.v.begin(), ones.v.end(), 1.0f);
  Tensor pos(1, 3, 16, 16);
  std::fill(pos.v.begin(), pos.v.end(), 0.25f);
  Tensor capped = apply_trigger(ones, pos);
  CHECK(max_abs(capped) <= 1.0);

  Rng rng(9);
  Tensor t(1, 3, 16, 16);
  for (auto& f : t.v) f = rng.uniformf(-0.4f, 0.4f);
  Tensor got = apply_trigger(img, t);
  for (size_t i = 0; i < got.v.size(); ++i) {
    float expect = img.v[i] + t.v[i];
    expect = expect < 0.0f ? 0.0f : (expect > 1.0f ? 1.0f : expect);
    CHECK(got.v[i] == expect);
  }
  CHECK_THROWS_AS(apply_trigger(img, Tensor(1, 3, 8, 8)), ValidationError);
}

TEST_CASE("classifier checkpoints round-trip bit-exactly") {
  Dataset ds = toy(3, 4, 16, 18);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  TrainedClassifier out = train_classifier(ds, "cnn_a", cfg);
  std::string path =
      (fs::temp_directory_path() / "ffcba_test_classifier.ckpt").string();
  save_classifier(out.model, path);
  ClassifierSplit back = load_classifier(path);
  CHECK(back.param_hash() == out.model.param_hash());
  CHECK(back.arch_id() == "cnn_a");
  CHECK(back.frozen());
  Tensor x = random_images(3, 3, 16, 10);
  CHECK(max_abs_diff(back.forward(x, false), out.model.forward(x, false)) == 0.0);
  fs::remove(path);
}

TEST_CASE("generator checkpoints round-trip bit-exactly") {
  TriggerGenerator gen(3, 20, 5, 0.25f, 77);
  // push some data through so batchnorm running stats are non-trivial
  gen.generate(random_images(8, 3, 20, 11), {0, 1, 2, 3, 4, 0, 1, 2}, true);
  std::string path = (fs::temp_directory_path() / "ffcba_test_gen.ckpt").string();
  save_generator(gen, path);
  TriggerGenerator back = load_generator(path);
  CHECK(back.param_hash() == gen.param_hash());
  CHECK(back.epsilon() == gen.epsilon());
  CHECK(back.output_padding() == gen.output_padding());
  Tensor x = random_images(2, 3, 20, 12);
  CHECK(max_abs_diff(back.generate(x, {1, 4}, false),
                     gen.generate(x, {1, 4}, false)) == 0.0);
  // wrong checkpoint kind is rejected
  CHECK_THROWS_AS(load_classifier(path), IoError);
  fs::remove(path);
}

TEST_CASE("centroid checkpoints round-trip") {
  FeatureCentroids cents;
  cents.centroids = Tensor::matrix(4, 8);
  Rng rng(13);
  for (auto& f : cents.centroids.v) f = rng.uniformf(-1.0f, 1.0f);
  std::string path = (fs::temp_directory_path() / "ffcba_test_cents.ckpt").string();
  save_centroids(cents, path);
  FeatureCentroids back = load_centroids(path);
  CHECK(max_abs_diff(back.centroids, cents.centroids) == 0.0);
  fs::remove(path);
}
