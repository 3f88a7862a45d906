#pragma once

#include <optional>
#include <vector>

#include "ffcba/dataset.hpp"
#include "ffcba/losses.hpp"
#include "ffcba/models.hpp"
#include "ffcba/optim.hpp"

namespace ffcba {

struct FsbaSchedule {
  float k = 1.5f;  // detail-band mixing gain, > 1 for attack use
  int epochs = 30;
  int batch_size = 64;
  float lr = 1e-4f;  // Adam
  LossWeights weights;
  double psnr_thresh = 35.0;
  uint64_t seed = 1;
};

struct StepReport {
  double l_output = 0.0;
  double l_latent = 0.0;
  std::optional<double> l_visual;
  double l_all = 0.0;
  int cond_match_count = 0;  // rows the proxy classified into the conditioning class
  int batch_size = 0;
};

struct TrainLogEntry {
  int stage = 0;  // 0 = FSBA, 1/2 = FMBA stages
  int epoch = 0;
  double l_output = 0.0, l_latent = 0.0, l_visual = 0.0, l_all = 0.0;
  double recluster_rate = 0.0;
};

// One FSBA update: perturb each sample with a reference's detail bands,
// generate triggers conditioned on the sample's own class, and take one Adam
// step on the generator only. The proxy must be frozen.
StepReport fsba_train_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                           const FeatureCentroids& cents, const Tensor& images,
                           const std::vector<int>& labels, const Tensor& refs,
                           const FsbaSchedule& sched, nn::Adam* optimizer);

std::vector<TrainLogEntry> fsba_train(TriggerGenerator& gen,
                                      ClassifierSplit& proxy, const Dataset& ds,
                                      const FsbaSchedule& sched);

// Proxy accuracy over the dataset after detail-band perturbation with gain k;
// reference samples are drawn with the training-time rejection rule.
double accuracy_perturbed(ClassifierSplit& proxy, const Dataset& ds, float k,
                          uint64_t seed);

// Proxy accuracy on apply_trigger(perturb(x), T) with own-class conditioning.
double accuracy_mixed(ClassifierSplit& proxy, TriggerGenerator& gen,
                      const Dataset& ds, float k, uint64_t seed);

}  // namespace ffcba
