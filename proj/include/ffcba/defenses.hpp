#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ffcba/dataset.hpp"
#include "ffcba/models.hpp"
#include "ffcba/rng.hpp"

namespace ffcba {

struct StripParams {
  int overlays = 16;
  double blend = 0.5;
  uint64_t seed = 1;
};

// Mean prediction entropy (nats) over n random clean-overlay blends:
// H(softmax(model(blend*input + (1-blend)*overlay))).
double strip_entropy(ClassifierSplit& model, const Tensor& input,
                     const Dataset& overlay_pool, int n, double blend, Rng& rng);

struct EntropyDistribution {
  std::vector<double> entropies;
  std::string population;  // "clean" | "poisoned"
};

struct StripResult {
  EntropyDistribution clean;
  EntropyDistribution poisoned;
  double ks = 0.0;
  // fraction of poisoned inputs below the clean distribution's 1st percentile
  double detection_rate_at_1pct_frr = 0.0;
  bool degenerate = false;
};

// Overlay draws are keyed by input position, so running the same set through
// both populations produces identical entropies (KS exactly 0).
StripResult strip_compare(ClassifierSplit& model, const Dataset& clean_set,
                          const Dataset& poisoned_set, const Dataset& overlay_pool,
                          const StripParams& params);

// Histogram with 50 fixed bins over [0, ln K] for the JSON defense report.
std::vector<int> entropy_histogram(const std::vector<double>& entropies,
                                   int num_classes);

struct PrunePoint {
  double fraction = 0.0;
  double ba = 0.0;
  double asr_avg = 0.0;
};

using PruneEval = std::function<std::pair<double, double>(ClassifierSplit&)>;

int last_conv_index(ClassifierSplit& model);

// Zeroes channels of the last conv layer in ascending order of mean absolute
// activation over the clean subset, evaluating (ba, asr) at each fraction.
// Works on a copy; the input model is untouched. Channel sets are nested.
std::vector<PrunePoint> fine_prune(ClassifierSplit& model,
                                   const Dataset& clean_subset, int layer_index,
                                   const std::vector<double>& fractions,
                                   const PruneEval& eval);

}  // namespace ffcba
