#include "ffcba/fsba.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "ffcba/detail/trigger_step.hpp"
#include "ffcba/rng.hpp"
#include "ffcba/wavelet.hpp"

namespace ffcba {

namespace detail {

Tensor gather_centroid_rows(const FeatureCentroids& cents,
                            const std::vector<int>& classes) {
  int d = cents.centroids.c;
  Tensor rows = Tensor::matrix(static_cast<int>(classes.size()), d);
  for (size_t i = 0; i < classes.size(); ++i) {
    check(classes[i] >= 0 && classes[i] < cents.centroids.n,
          "centroid row: class out of range");
    std::memcpy(rows.data() + i * d,
                cents.centroids.data() + static_cast<size_t>(classes[i]) * d,
                static_cast<size_t>(d) * sizeof(float));
  }
  return rows;
}

StepReport trigger_training_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                                 const FeatureCentroids& cents,
                                 const Tensor& images,
                                 const std::vector<int>& cond_classes,
                                 const LossWeights& weights, double psnr_thresh,
                                 nn::Adam* optimizer) {
  check(proxy.frozen(), "trigger training: proxy must be frozen");
  check(images.n == static_cast<int>(cond_classes.size()),
        "trigger training: one conditioning class per image required");
  check(cents.centroids.n == proxy.num_classes() &&
            cents.centroids.c == proxy.latent_dim(),
        "trigger training: centroids do not match the proxy");

  gen.net().zero_grads();
  Tensor trigger = gen.generate(images, cond_classes, true);

  // clamp01 with an inclusive pass-through subgradient
  Tensor pre = add(images, trigger);
  Tensor mixed = clamp01(pre);

  Tensor latents = proxy.features(mixed, false);
  Tensor logits = proxy.head_forward(latents, false);
  Tensor cent_rows = gather_centroid_rows(cents, cond_classes);

  StepReport report;
  report.batch_size = images.n;
  report.l_output = output_layer_loss(logits, cond_classes);
  report.l_latent = latent_space_loss_rows(latents, cent_rows);
  LossTerms terms{report.l_output, report.l_latent, std::nullopt};
  if (weights.gamma.has_value()) {
    report.l_visual = visual_loss(images, mixed, psnr_thresh);
    terms.visual = report.l_visual;
  }
  report.l_all = combined_loss(terms, weights);

  for (int ni = 0; ni < logits.n; ++ni) {
    const float* row = logits.data() + static_cast<size_t>(ni) * logits.c;
    int arg = static_cast<int>(std::max_element(row, row + logits.c) - row);
    if (arg == cond_classes[ni]) ++report.cond_match_count;
  }

  Tensor glogits = output_layer_loss_grad(logits, cond_classes);
  for (auto& f : glogits.v) f *= static_cast<float>(weights.alpha);
  Tensor glatent = latent_space_loss_rows_grad(latents, cent_rows);
  for (auto& f : glatent.v) f *= static_cast<float>(weights.beta);

  Tensor gmixed = proxy.backward_to_input(glogits, glatent);
  if (weights.gamma.has_value()) {
    Tensor gvis = visual_loss_grad_mixed(images, mixed, psnr_thresh);
    for (size_t i = 0; i < gmixed.v.size(); ++i)
      gmixed.v[i] += static_cast<float>(*weights.gamma) * gvis.v[i];
  }
  for (size_t i = 0; i < gmixed.v.size(); ++i)
    if (pre.v[i] < 0.0f || pre.v[i] > 1.0f) gmixed.v[i] = 0.0f;

  gen.backward(gmixed);
  if (optimizer) optimizer->step();
  return report;
}

}  // namespace detail

namespace {

void validate_schedule(const FsbaSchedule& sched) {
  check(sched.k > 1.0f, "fsba: mixing gain k must exceed 1");
  check(sched.lr >= 0.0f, "fsba: learning rate must be >= 0");
  check(sched.epochs >= 0, "fsba: epochs must be >= 0");
  check(sched.batch_size >= 1, "fsba: batch size must be >= 1");
  check(sched.weights.gamma.has_value(),
        "fsba: the visual term is part of the FSBA objective");
  check(sched.psnr_thresh > 0.0, "fsba: psnr threshold must be positive");
}

Tensor perturb_batch(const Tensor& images, const Tensor& refs, float k) {
  Tensor out(images.n, images.c, images.h, images.w);
  for (int ni = 0; ni < images.n; ++ni) {
    Tensor xc(1, images.c, images.h, images.w);
    Tensor xr(1, images.c, images.h, images.w);
    std::memcpy(xc.data(), images.slice(ni), xc.numel() * sizeof(float));
    std::memcpy(xr.data(), refs.slice(ni), xr.numel() * sizeof(float));
    Tensor xp = perturb_midhigh(xc, xr, k);
    std::memcpy(out.slice(ni), xp.data(), xp.numel() * sizeof(float));
  }
  return out;
}

std::vector<int> sample_refs(const std::vector<int>& order, int ds_size, Rng& rng) {
  std::vector<int> refs(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    int r = rng.uniform_int(ds_size);
    while (r == order[i]) r = rng.uniform_int(ds_size);
    refs[i] = r;
  }
  return refs;
}

}  // namespace

StepReport fsba_train_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                           const FeatureCentroids& cents, const Tensor& images,
                           const std::vector<int>& labels, const Tensor& refs,
                           const FsbaSchedule& sched, nn::Adam* optimizer) {
  validate_schedule(sched);
  check(images.same_shape(refs), "fsba_train_step: batch/reference size mismatch");
  Tensor perturbed = perturb_batch(images, refs, sched.k);
  return detail::trigger_training_step(gen, proxy, cents, perturbed, labels,
                                       sched.weights, sched.psnr_thresh,
                                       optimizer);
}

std::vector<TrainLogEntry> fsba_train(TriggerGenerator& gen,
                                      ClassifierSplit& proxy, const Dataset& ds,
                                      const FsbaSchedule& sched) {
  validate_schedule(sched);
  check(proxy.frozen(), "fsba_train: proxy must be frozen");
  auto by_class = ds.indices_by_class();
  for (int k = 0; k < ds.num_classes; ++k)
    check(!by_class[k].empty(),
          "fsba_train: class " + std::to_string(k) + " has no samples");

  FeatureCentroids cents = compute_centroids(proxy, ds);
  nn::Adam adam(gen.params(), sched.lr);
  Rng rng(Rng::next_hash(sched.seed, 0xf5baULL));

  std::vector<TrainLogEntry> log;
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    Rng erng = rng.fork(epoch);
    erng.shuffle(order);
    std::vector<int> refs = sample_refs(order, ds.size(), erng);
    TrainLogEntry entry;
    entry.epoch = epoch;
    long matches = 0, seen = 0;
    int batches = 0;
    for (int start = 0; start < ds.size(); start += sched.batch_size) {
      int end = std::min(ds.size(), start + sched.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      std::vector<int> ridx(refs.begin() + start, refs.begin() + end);
      std::vector<int> labels(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) labels[i] = ds.labels[idx[i]];
      StepReport rep = fsba_train_step(gen, proxy, cents, ds.gather(idx), labels,
                                       ds.gather(ridx), sched, &adam);
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
  return log;
}

double accuracy_perturbed(ClassifierSplit& proxy, const Dataset& ds, float k,
                          uint64_t seed) {
  check(ds.size() > 0, "accuracy_perturbed: empty dataset");
  Rng rng(Rng::next_hash(seed, 0xacc1ULL));
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> refs = sample_refs(order, ds.size(), rng);
  long correct = 0;
  const int bs = 128;
  for (int start = 0; start < ds.size(); start += bs) {
    int end = std::min(ds.size(), start + bs);
    std::vector<int> idx(order.begin() + start, order.begin() + end);
    std::vector<int> ridx(refs.begin() + start, refs.begin() + end);
    Tensor perturbed = perturb_batch(ds.gather(idx), ds.gather(ridx), k);
    auto preds = predict(proxy, perturbed);
    for (size_t i = 0; i < idx.size(); ++i)
      if (preds[i] == ds.labels[idx[i]]) ++correct;
  }
  return static_cast<double>(correct) / ds.size();
}

double accuracy_mixed(ClassifierSplit& proxy, TriggerGenerator& gen,
                      const Dataset& ds, float k, uint64_t seed) {
  check(ds.size() > 0, "accuracy_mixed: empty dataset");
  Rng rng(Rng::next_hash(seed, 0xacc1ULL));
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> refs = sample_refs(order, ds.size(), rng);
  long correct = 0;
  const int bs = 128;
  for (int start = 0; start < ds.size(); start += bs) {
    int end = std::min(ds.size(), start + bs);
    std::vector<int> idx(order.begin() + start, order.begin() + end);
    std::vector<int> ridx(refs.begin() + start, refs.begin() + end);
    std::vector<int> labels(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) labels[i] = ds.labels[idx[i]];
    Tensor perturbed = perturb_batch(ds.gather(idx), ds.gather(ridx), k);
    Tensor trigger = gen.generate(perturbed, labels, false);
    Tensor mixed = clamp01(add(perturbed, trigger));
    auto preds = predict(proxy, mixed);
    for (size_t i = 0; i < idx.size(); ++i)
      if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / ds.size();
}

}  // namespace ffcba
