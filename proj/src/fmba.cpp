#include "ffcba/fmba.hpp"

#include <algorithm>
#include <numeric>

#include "ffcba/detail/trigger_step.hpp"
#include "ffcba/rng.hpp"

namespace ffcba {

namespace {

void validate_schedule(const FmbaSchedule& sched) {
  check(sched.stage1_epochs >= 0 && sched.stage2_epochs >= 0,
        "fmba: epoch counts must be >= 0");
  check(sched.lr >= 0.0f, "fmba: learning rate must be >= 0");
  check(sched.batch_size >= 1, "fmba: batch size must be >= 1");
  check(sched.stage1_weights.gamma.has_value(),
        "fmba: stage 1 carries the visual term");
  check(!sched.stage2_weights.gamma.has_value(),
        "fmba: stage 2 must not carry a visual weight");
  check(sched.psnr_thresh > 0.0, "fmba: psnr threshold must be positive");
}

}  // namespace

std::vector<int> sample_stage1_targets(const std::vector<int>& labels,
                                       int num_classes, Rng& rng) {
  check(num_classes >= 2, "stage-1 target sampling: need at least two classes");
  std::vector<int> targets(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    int draw = rng.uniform_int(num_classes - 1);
    targets[i] = draw >= labels[i] ? draw + 1 : draw;
  }
  return targets;
}

StepReport fmba_stage1_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                            const FeatureCentroids& cents, const Tensor& images,
                            const std::vector<int>& true_labels,
                            const std::vector<int>& target_classes,
                            const FmbaSchedule& sched, nn::Adam* optimizer) {
  validate_schedule(sched);
  check(true_labels.size() == target_classes.size() &&
            static_cast<int>(true_labels.size()) == images.n,
        "fmba_stage1_step: label/target row mismatch");
  for (size_t i = 0; i < true_labels.size(); ++i)
    check(true_labels[i] != target_classes[i],
          "fmba_stage1_step: row " + std::to_string(i) +
              " targets its own class; stage 1 is out-of-class only");
  return detail::trigger_training_step(gen, proxy, cents, images, target_classes,
                                       sched.stage1_weights, sched.psnr_thresh,
                                       optimizer);
}

StepReport fmba_stage2_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                            const FeatureCentroids& cents, const Tensor& images,
                            const std::vector<int>& labels,
                            const FmbaSchedule& sched, nn::Adam* optimizer) {
  validate_schedule(sched);
  return detail::trigger_training_step(gen, proxy, cents, images, labels,
                                       sched.stage2_weights, sched.psnr_thresh,
                                       optimizer);
}

std::vector<TrainLogEntry> fmba_train(TriggerGenerator& gen,
                                      ClassifierSplit& proxy, const Dataset& ds,
                                      const FmbaSchedule& sched) {
  validate_schedule(sched);
  check(proxy.frozen(), "fmba_train: proxy must be frozen");
  auto by_class = ds.indices_by_class();
  for (int k = 0; k < ds.num_classes; ++k)
    check(!by_class[k].empty(),
          "fmba_train: class " + std::to_string(k) + " has no samples");

  // one set of centroids from the frozen proxy, shared by both stages
  FeatureCentroids cents = compute_centroids(proxy, ds);
  nn::Adam adam(gen.params(), sched.lr);
  Rng rng(Rng::next_hash(sched.seed, 0xf8baULL));

  std::vector<TrainLogEntry> log;
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < sched.stage1_epochs; ++epoch) {
    Rng erng = rng.fork(epoch);
    erng.shuffle(order);
    std::vector<int> labels(ds.size());
    for (int i = 0; i < ds.size(); ++i) labels[i] = ds.labels[order[i]];
    std::vector<int> targets = sample_stage1_targets(labels, ds.num_classes, erng);
    TrainLogEntry entry;
    entry.stage = 1;
    entry.epoch = epoch;
    long matches = 0, seen = 0;
    int batches = 0;
    for (int start = 0; start < ds.size(); start += sched.batch_size) {
      int end = std::min(ds.size(), start + sched.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::vector<int> btrue(labels.begin() + start, labels.begin() + end);
      std::vector<int> btgt(targets.begin() + start, targets.begin() + end);
      StepReport rep = fmba_stage1_step(gen, proxy, cents, ds.gather(idx), btrue,
                                        btgt, sched, &adam);
      entry.l_output += rep.l_output;
      entry.l_latent += rep.l_latent;
      entry.l_visual += rep.l_visual.value_or(0.0);
      entry.l_all += rep.l_all;
      matches += rep.cond_match_count;
      seen += rep.batch_size;
      ++batches;
    }
    entry.l_output /= batches;
    entry.l_latent /= batches;
    entry.l_visual /= batches;
    entry.l_all /= batches;
    entry.recluster_rate = static_cast<double>(matches) / seen;
    log.push_back(entry);
  }

  for (int epoch = 0; epoch < sched.stage2_epochs; ++epoch) {
    Rng erng = rng.fork(0x57a6e2ULL + epoch);
    erng.shuffle(order);
    TrainLogEntry entry;
    entry.stage = 2;
    entry.epoch = epoch;
    long matches = 0, seen = 0;
    int batches = 0;
    for (int start = 0; start < ds.size(); start += sched.batch_size) {
      int end = std::min(ds.size(), start + sched.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::vector<int> blabels(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) blabels[i] = ds.labels[idx[i]];
      StepReport rep = fmba_stage2_step(gen, proxy, cents, ds.gather(idx),
                                        blabels, sched, &adam);
      entry.l_output += rep.l_output;
      entry.l_latent += rep.l_latent;
      entry.l_all += rep.l_all;
      matches += rep.cond_match_count;
      seen += rep.batch_size;
      ++batches;
    }
    entry.l_output /= batches;
    entry.l_latent /= batches;
    entry.l_all /= batches;
    entry.recluster_rate = static_cast<double>(matches) / seen;
    log.push_back(entry);
  }
  return log;
}

}  // namespace ffcba
