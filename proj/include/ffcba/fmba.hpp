#pragma once

#include <vector>

#include "ffcba/fsba.hpp"

namespace ffcba {

struct FmbaSchedule {
  int stage1_epochs = 20;
  int stage2_epochs = 10;
  int batch_size = 64;
  float lr = 1e-4f;  // Adam
  LossWeights stage1_weights;                     // alpha, beta, gamma
  LossWeights stage2_weights{0.5, 0.3, std::nullopt};  // visual term omitted
  double psnr_thresh = 35.0;
  uint64_t seed = 1;
};

// Stage 1: migrate out-of-class samples into the target class cluster. Every
// row must satisfy target != true label.
StepReport fmba_stage1_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                            const FeatureCentroids& cents, const Tensor& images,
                            const std::vector<int>& true_labels,
                            const std::vector<int>& target_classes,
                            const FmbaSchedule& sched, nn::Adam* optimizer);

// Stage 2: fine-tune on in-class samples, output and latent terms only.
StepReport fmba_stage2_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                            const FeatureCentroids& cents, const Tensor& images,
                            const std::vector<int>& labels,
                            const FmbaSchedule& sched, nn::Adam* optimizer);

std::vector<TrainLogEntry> fmba_train(TriggerGenerator& gen,
                                      ClassifierSplit& proxy, const Dataset& ds,
                                      const FmbaSchedule& sched);

// Uniform draw from the K-1 non-true classes, one target per sample.
std::vector<int> sample_stage1_targets(const std::vector<int>& labels,
                                       int num_classes, Rng& rng);

}  // namespace ffcba
