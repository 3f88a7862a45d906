#include <doctest.h>

#include <cmath>

#include "ffcba/fsba.hpp"
#include "ffcba/rng.hpp"

using namespace ffcba;

namespace {

struct Fixture {
  Dataset ds;
  ClassifierSplit proxy;
  FeatureCentroids cents;

  Fixture()
      : ds(make()),
        proxy(ClassifierSplit::build("mlp_tiny", 3, 16, 4, 3)),
        cents() {
    TrainConfig cfg;
    cfg.optimizer = "adam";
    cfg.lr = 0.003f;
    cfg.epochs = 12;
    cfg.batch_size = 16;
    cfg.seed = 3;
    proxy = train_classifier(ds, "mlp_tiny", cfg).model;
    cents = compute_centroids(proxy, ds);
  }

  static Dataset make() {
    ToyParams p;
    p.num_classes = 4;
    p.image_size = 16;
    p.channels = 3;
    p.seed = 77;
    return make_toy_dataset(p, 24, 1);
  }

  FsbaSchedule sched() const {
    FsbaSchedule s;
    s.k = 2.0f;  // strong mixing so the tiny proxy shows a clear accuracy gap
    s.epochs = 8;
    s.batch_size = 16;
    s.lr = 1e-3f;
    s.seed = 5;
    return s;
  }
};

}  // namespace

TEST_CASE("fsba step with zero learning rate reports losses without updating") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 9);
  uint64_t before = gen.param_hash();
  FsbaSchedule sched = fx.sched();
  sched.lr = 0.0f;
  nn::Adam adam(gen.params(), sched.lr);
  std::vector<int> idx = {0, 1, 30, 55};
  std::vector<int> labels;
  for (int i : idx) labels.push_back(fx.ds.labels[i]);
  StepReport rep =
      fsba_train_step(gen, fx.proxy, fx.cents, fx.ds.gather(idx), labels,
                      fx.ds.gather({5, 6, 7, 8}), sched, &adam);
  CHECK(gen.param_hash() == before);
  CHECK(rep.l_all != 0.0);
  CHECK(rep.l_visual.has_value());
  CHECK(rep.batch_size == 4);
}

TEST_CASE("fsba step leaves the frozen proxy bit-identical") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 10);
  uint64_t proxy_before = fx.proxy.param_hash();
  FsbaSchedule sched = fx.sched();
  nn::Adam adam(gen.params(), sched.lr);
  std::vector<int> idx = {0, 25, 50, 75};
  std::vector<int> labels;
  for (int i : idx) labels.push_back(fx.ds.labels[i]);
  fsba_train_step(gen, fx.proxy, fx.cents, fx.ds.gather(idx), labels,
                  fx.ds.gather({1, 2, 3, 4}), sched, &adam);
  CHECK(fx.proxy.param_hash() == proxy_before);
}

TEST_CASE("fsba step validation: frozen proxy, ref sizes, k > 1") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 11);
  FsbaSchedule sched = fx.sched();
  nn::Adam adam(gen.params(), sched.lr);
  std::vector<int> idx = {0, 1};
  std::vector<int> labels = {fx.ds.labels[0], fx.ds.labels[1]};

  ClassifierSplit unfrozen = ClassifierSplit::build("mlp_tiny", 3, 16, 4, 3);
  CHECK_THROWS_AS(
      fsba_train_step(gen, unfrozen, fx.cents, fx.ds.gather(idx), labels,
                      fx.ds.gather({2, 3}), sched, &adam),
      ValidationError);

  CHECK_THROWS_AS(fsba_train_step(gen, fx.proxy, fx.cents, fx.ds.gather(idx),
                                  labels, fx.ds.gather({2}), sched, &adam),
                  ValidationError);

  FsbaSchedule bad = sched;
  bad.k = 1.0f;
  CHECK_THROWS_AS(fsba_train_step(gen, fx.proxy, fx.cents, fx.ds.gather(idx),
                                  labels, fx.ds.gather({2, 3}), bad, &adam),
                  ValidationError);

  FsbaSchedule no_gamma = sched;
  no_gamma.weights.gamma.reset();
  CHECK_THROWS_AS(fsba_train_step(gen, fx.proxy, fx.cents, fx.ds.gather(idx),
                                  labels, fx.ds.gather({2, 3}), no_gamma, &adam),
                  ValidationError);
}

TEST_CASE("perturbation lowers proxy accuracy on the training set") {
  Fixture fx;
  double clean = accuracy(fx.proxy, fx.ds);
  double perturbed = accuracy_perturbed(fx.proxy, fx.ds, 1.5f, 42);
  CHECK(clean > 0.9);  // sanity: the proxy actually fits the data
  CHECK(perturbed < clean);
}

TEST_CASE("fsba training reduces the loss and re-clusters mixed samples") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 12);
  FsbaSchedule sched = fx.sched();
  auto log = fsba_train(gen, fx.proxy, fx.ds, sched);
  REQUIRE(static_cast<int>(log.size()) == sched.epochs);
  CHECK(log.back().l_all < log.front().l_all);
  CHECK(log.back().recluster_rate >= 0.95);
  for (const auto& e : log) CHECK(e.stage == 0);

  // trigger efficacy: mixed accuracy beats perturbed accuracy after training
  double perturbed = accuracy_perturbed(fx.proxy, fx.ds, sched.k, 42);
  double mixed = accuracy_mixed(fx.proxy, gen, fx.ds, sched.k, 42);
  CHECK(mixed > perturbed);
}

TEST_CASE("fsba training is deterministic given the seed") {
  Fixture fx;
  TriggerGenerator gen1(3, 16, 4, 0.3f, 13);
  TriggerGenerator gen2(3, 16, 4, 0.3f, 13);
  FsbaSchedule sched = fx.sched();
  sched.epochs = 2;
  fsba_train(gen1, fx.proxy, fx.ds, sched);
  fsba_train(gen2, fx.proxy, fx.ds, sched);
  CHECK(gen1.param_hash() == gen2.param_hash());
}

TEST_CASE("fsba zero epochs leaves the generator unchanged with an empty log") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 14);
  uint64_t before = gen.param_hash();
  FsbaSchedule sched = fx.sched();
  sched.epochs = 0;
  auto log = fsba_train(gen, fx.proxy, fx.ds, sched);
  CHECK(log.empty());
  CHECK(gen.param_hash() == before);
}

TEST_CASE("fsba training rejects datasets with a missing class") {
  Fixture fx;
  TriggerGenerator gen(3, 16, 4, 0.3f, 15);
  Dataset missing = fx.ds;
  for (auto& l : missing.labels)
    if (l == 3) l = 0;
  CHECK_THROWS_WITH_AS(fsba_train(gen, fx.proxy, missing, fx.sched()),
                       doctest::Contains("class 3"), ValidationError);
}
