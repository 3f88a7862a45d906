#pragma once

#include <string>

#include "ffcba/config.hpp"
#include "ffcba/pipeline.hpp"

namespace ffcba {

// Artifact paths inside a run directory.
struct RunPaths {
  std::string root;
  std::string manifest() const { return root + "/manifest.json"; }
  std::string proxy_ckpt() const { return root + "/proxy.ckpt"; }
  std::string centroids_ckpt() const { return root + "/centroids.ckpt"; }
  std::string generator_ckpt() const { return root + "/generator.ckpt"; }
  std::string trigger_log() const { return root + "/trigger_train_log.ndjson"; }
  std::string poisoned_dir() const { return root + "/poisoned/train"; }
  std::string poison_manifest() const { return root + "/poison_manifest.json"; }
  std::string victim_ckpt() const { return root + "/victim.ckpt"; }
  std::string victim_clean_ckpt() const { return root + "/victim_clean.ckpt"; }
  std::string report() const { return root + "/attack_report.json"; }
};

struct RunResult {
  RunPaths paths;
  AttackReport report;
  double proxy_train_accuracy = 0.0;
  double victim_ba = 0.0;       // backdoored victim, clean test inputs
  double clean_ba = 0.0;        // never-poisoned reference victim
};

// Executes the phase chain train-proxy -> centroids -> train-trigger ->
// poison -> train-victim (+ a never-poisoned reference victim) -> evaluate.
// Completed phases are skipped when their manifest stamp matches the resolved
// config hash; a stamp with a different hash rejects the run directory as
// stale. `force` re-executes everything; `until` stops after the named phase.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& run_dir,
                         bool force = false,
                         const std::string& until = "evaluate");

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

inline constexpr const char* kToolkitVersion = "1.0.0";

}  // namespace ffcba
