#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffcba/models.hpp"

namespace ffcba {

struct DatasetSpec {
  std::string name = "toy";  // toy | dir | binary
  std::string path;          // dir: root with train/ and test/; binary: unused
  std::vector<std::string> train_files;  // binary archives
  std::vector<std::string> test_files;
  int image_size = 24;
  int channels = 3;
  int num_classes = 10;
  int train_per_class = 500;  // toy
  int test_per_class = 100;   // toy
  uint64_t seed = 7;
  double noise_std = 0.06;      // toy texture knobs
  double background_mix = 0.22;
  int translate_px = 2;
  double texture_amp = 0.26;
  int styles_per_class = 1;
  double hard_fraction = 0.0;
};

struct TriggerTrainSpec {
  int epochs = 30;  // FSBA
  int stage1_epochs = 20;  // FMBA
  int stage2_epochs = 10;
  int batch_size = 64;
  double lr = 1e-4;
};

struct SeedSpec {
  uint64_t proxy = 11;
  uint64_t trigger = 12;
  uint64_t poison = 13;
  uint64_t victim = 14;
  uint64_t eval = 15;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::string proxy_arch = "cnn_a";
  std::string victim_arch = "cnn_a";
  std::string paradigm = "fsba";  // fsba | fmba
  double epsilon = 80.0 / 255.0;
  double psnr_thresh = 35.0;
  double k = 1.5;
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 0.5;
  double poison_rate = 0.004;
  TrainConfig proxy_train;
  TrainConfig victim_train;
  TriggerTrainSpec trigger_train;
  SeedSpec seeds;
};

// Strict parse: unknown keys are errors, omitted keys take the defaults above.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

// Fully resolved config with every default expanded; what the manifest stores.
std::string config_to_json(const ExperimentConfig& cfg);

// Hash of the resolved config; phase stamps carry it to detect staleness.
std::string config_hash(const ExperimentConfig& cfg);

// Cross-module precondition checks, run before any phase starts.
void validate_config(const ExperimentConfig& cfg);

// Materializes the train/test pair described by the spec, applying the
// recorded center-crop for foreign sizes. cropped_to is set when a crop fired.
struct LoadedData {
  Dataset train;
  Dataset test;
  int cropped_to = 0;  // 0 when no crop was needed
};
LoadedData load_dataset(const DatasetSpec& spec);

}  // namespace ffcba
