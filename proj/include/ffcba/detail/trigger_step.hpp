#pragma once

#include <vector>

#include "ffcba/fsba.hpp"

namespace ffcba::detail {

// Shared core of the FSBA step and both FMBA stages: trigger generation,
// clamped mixing, the weighted loss stack, and one generator-only update.
// The visual term is computed iff weights.gamma is set, with `images` as the
// visual base. Passing a null optimizer evaluates gradients without stepping.
StepReport trigger_training_step(TriggerGenerator& gen, ClassifierSplit& proxy,
                                 const FeatureCentroids& cents,
                                 const Tensor& images,
                                 const std::vector<int>& cond_classes,
                                 const LossWeights& weights, double psnr_thresh,
                                 nn::Adam* optimizer);

Tensor gather_centroid_rows(const FeatureCentroids& cents,
                            const std::vector<int>& classes);

}  // namespace ffcba::detail
