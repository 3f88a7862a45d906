#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ffcba/dataset.hpp"
#include "ffcba/models.hpp"

namespace ffcba {

struct PoisonPlan {
  double rate = 0.004;
  uint64_t seed = 1;
  std::string generator_checkpoint;  // recorded in the manifest
};

struct PoisonEntry {
  int index = 0;
  int class_id = 0;
};

struct PoisonManifest {
  std::vector<PoisonEntry> entries;
  int per_class_count = 0;
  double rate = 0.0;
  uint64_t seed = 0;
  std::string generator_checksum;
};

// Clean-label injection: for each class k the first floor(N_p/K) samples of a
// seeded shuffle of that class are replaced by apply_trigger(x, G(x, v_k)),
// labels untouched. Triggers are generated from clean samples; the detail-band
// perturbation exists only inside FSBA training. Poisoned pixels are quantized
// to the 1/255 storage grid so on-disk persistence is exact.
Dataset build_poisoned_dataset(const Dataset& ds, TriggerGenerator& gen,
                               const PoisonPlan& plan, PoisonManifest* manifest);

std::string manifest_to_json(const PoisonManifest& m);
PoisonManifest manifest_from_json(const std::string& text);

struct AttackReport {
  std::vector<double> asr_per_class;
  double asr_avg = 0.0;
  double ba = 0.0;
  double dv = 0.0;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  std::optional<double> adversarial_baseline_rate;
};

std::string report_to_json(const AttackReport& r);
AttackReport report_from_json(const std::string& text);

// ASR_t counts only test samples whose true label differs from t. Visual
// metrics are averaged over every evaluated (clean, triggered) pair. When a
// never-poisoned model is supplied the same triggered inputs are scored
// against it to produce the adversarial baseline rate.
AttackReport evaluate_attack(ClassifierSplit& victim, TriggerGenerator& gen,
                             const Dataset& test, double clean_reference_ba,
                             ClassifierSplit* clean_model = nullptr);

// ASR without the visual metrics; what prune curves and sweeps iterate on.
std::vector<double> asr_per_class(ClassifierSplit& victim, TriggerGenerator& gen,
                                  const Dataset& test);
double average_asr(ClassifierSplit& victim, TriggerGenerator& gen,
                   const Dataset& test);

struct SweepPoint {
  double rate = 0.0;
  double asr_avg = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  // true when asr never drops by more than tol between consecutive rates
  bool nondecreasing_within(double tol) const;
};

SweepResult poison_rate_sweep(const Dataset& train, const Dataset& test,
                              TriggerGenerator& gen,
                              const std::string& victim_arch,
                              const TrainConfig& victim_cfg, double clean_ba,
                              const std::vector<double>& rates,
                              uint64_t poison_seed);

struct VisualStats {
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
};

// Windowed SSIM, 11x11 Gaussian window (sigma 1.5), k1=0.01, k2=0.03, L=1,
// averaged over the valid region and channels.
double ssim(const Tensor& a, const Tensor& b);

// Batched pairs; PSNR values are capped at 100 dB inside the mean, and the
// mean is the +inf sentinel only when every pair is identical.
VisualStats visual_report(const Tensor& clean_batch, const Tensor& poisoned_batch);

}  // namespace ffcba
