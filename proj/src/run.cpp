#include "ffcba/run.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ffcba/fmba.hpp"
#include "ffcba/fsba.hpp"

namespace fs = std::filesystem;

namespace ffcba {

using nlohmann::json;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

class Manifest {
 public:
  Manifest(const RunPaths& paths, const ExperimentConfig& cfg, bool force)
      : path_(paths.manifest()), hash_(config_hash(cfg)) {
    if (!force && fs::exists(path_)) {
      j_ = json::parse(read_text_file(path_));
      std::string stored = j_.value("config_hash", "");
      if (stored != hash_)
        throw ValidationError(
            "run directory is stale: manifest config hash " + stored +
            " does not match the requested config " + hash_);
      if (!j_.contains("phases")) j_["phases"] = json::object();
    } else {
      j_["config"] = json::parse(config_to_json(cfg));
      j_["config_hash"] = hash_;
      j_["versions"] = {{"toolkit", kToolkitVersion},
                        {"checkpoint_format", 1},
                        {"config_format", 1}};
      j_["phases"] = json::object();
      write_text_file(path_, j_.dump(2) + "\n");
    }
  }

  bool done(const std::string& phase, const std::vector<std::string>& artifacts) {
    if (!j_["phases"].contains(phase)) return false;
    const json& p = j_["phases"][phase];
    if (p.value("config_hash", "") != hash_)
      throw ValidationError("phase " + phase +
                            " has a stale checkpoint: config hash mismatch");
    for (const auto& a : artifacts)
      if (!fs::exists(a)) return false;
    return p.value("completed", false);
  }

  void record(const std::string& phase, const json& info) {
    json p = info;
    p["completed"] = true;
    p["config_hash"] = hash_;
    j_["phases"][phase] = p;
    write_text_file(path_, j_.dump(2) + "\n");
  }

 private:
  std::string path_;
  std::string hash_;
  json j_;
};

std::string log_to_ndjson(const std::vector<TrainLogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    json j = {{"stage", e.stage},          {"epoch", e.epoch},
              {"l_output", e.l_output},    {"l_latent", e.l_latent},
              {"l_visual", e.l_visual},    {"l_all", e.l_all},
              {"recluster_rate", e.recluster_rate}};
    out += j.dump() + "\n";
  }
  return out;
}

template <typename Fn>
void run_phase(Manifest& manifest, const std::string& name,
               const std::vector<std::string>& artifacts, Fn&& fn) {
  if (manifest.done(name, artifacts)) return;
  try {
    json info = fn();
    manifest.record(name, info);
  } catch (const ValidationError& e) {
    throw ValidationError("phase " + name + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError("phase " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("phase " + name + " failed: " + e.what());
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& run_dir,
                         bool force, const std::string& until) {
  validate_config(cfg);
  RunPaths paths{run_dir};
  fs::create_directories(run_dir);
  Manifest manifest(paths, cfg, force);

  RunResult result;
  result.paths = paths;

  LoadedData data = load_dataset(cfg.dataset);
  run_phase(manifest, "dataset", {}, [&] {
    return json{{"train_size", data.train.size()},
                {"test_size", data.test.size()},
                {"image_size", data.train.height},
                {"center_cropped_to", data.cropped_to}};
  });
  if (until == "dataset") return result;

  run_phase(manifest, "train-proxy", {paths.proxy_ckpt()}, [&] {
    TrainConfig pc = cfg.proxy_train;
    pc.seed = cfg.seeds.proxy;
    TrainedClassifier proxy = train_classifier(data.train, cfg.proxy_arch, pc);
    save_classifier(proxy.model, paths.proxy_ckpt());
    return json{{"arch", cfg.proxy_arch},
                {"final_train_accuracy", proxy.final_train_accuracy}};
  });
  ClassifierSplit proxy = load_classifier(paths.proxy_ckpt());
  result.proxy_train_accuracy = accuracy(proxy, data.train);
  if (until == "train-proxy") return result;

  run_phase(manifest, "centroids", {paths.centroids_ckpt()}, [&] {
    FeatureCentroids cents = compute_centroids(proxy, data.train);
    save_centroids(cents, paths.centroids_ckpt());
    return json{{"latent_dim", proxy.latent_dim()}};
  });
  if (until == "centroids") return result;

  run_phase(manifest, "train-trigger", {paths.generator_ckpt()}, [&] {
    TriggerGenerator gen(data.train.channels, data.train.height,
                         data.train.num_classes,
                         static_cast<float>(cfg.epsilon), cfg.seeds.trigger);
    std::vector<TrainLogEntry> log;
    if (cfg.paradigm == "fsba") {
      FsbaSchedule sched;
      sched.k = static_cast<float>(cfg.k);
      sched.epochs = cfg.trigger_train.epochs;
      sched.batch_size = cfg.trigger_train.batch_size;
      sched.lr = static_cast<float>(cfg.trigger_train.lr);
      sched.weights = {cfg.alpha, cfg.beta, cfg.gamma};
      sched.psnr_thresh = cfg.psnr_thresh;
      sched.seed = cfg.seeds.trigger;
      log = fsba_train(gen, proxy, data.train, sched);
    } else {
      FmbaSchedule sched;
      sched.stage1_epochs = cfg.trigger_train.stage1_epochs;
      sched.stage2_epochs = cfg.trigger_train.stage2_epochs;
      sched.batch_size = cfg.trigger_train.batch_size;
      sched.lr = static_cast<float>(cfg.trigger_train.lr);
      sched.stage1_weights = {cfg.alpha, cfg.beta, cfg.gamma};
      sched.stage2_weights = {cfg.alpha, cfg.beta, std::nullopt};
      sched.psnr_thresh = cfg.psnr_thresh;
      sched.seed = cfg.seeds.trigger;
      log = fmba_train(gen, proxy, data.train, sched);
    }
    save_generator(gen, paths.generator_ckpt());
    write_text_file(paths.trigger_log(), log_to_ndjson(log));
    json info = {{"paradigm", cfg.paradigm},
                 {"conditioning", "onehot-planes-concat"},
                 {"output_padding", gen.output_padding()},
                 {"epsilon", gen.epsilon()}};
    if (!log.empty()) info["final_recluster_rate"] = log.back().recluster_rate;
    return info;
  });
  TriggerGenerator gen = load_generator(paths.generator_ckpt());
  if (until == "train-trigger") return result;

  run_phase(manifest, "poison", {paths.poison_manifest()}, [&] {
    PoisonPlan plan;
    plan.rate = cfg.poison_rate;
    plan.seed = cfg.seeds.poison;
    plan.generator_checkpoint = paths.generator_ckpt();
    PoisonManifest pm;
    Dataset poisoned = build_poisoned_dataset(data.train, gen, plan, &pm);
    fs::remove_all(paths.poisoned_dir());
    save_as_class_dirs(poisoned, paths.poisoned_dir());
    write_text_file(paths.poison_manifest(), manifest_to_json(pm));
    return json{{"poisoned_count", pm.entries.size()},
                {"per_class_count", pm.per_class_count},
                {"generator_checksum", pm.generator_checksum}};
  });
  if (until == "poison") return result;

  run_phase(manifest, "train-victim", {paths.victim_ckpt()}, [&] {
    // the persisted poisoned dataset is the canonical input, as it would be
    // for an outside victim
    Dataset poisoned = load_class_dirs(paths.poisoned_dir());
    TrainConfig vc = cfg.victim_train;
    vc.seed = cfg.seeds.victim;
    TrainedClassifier victim = train_classifier(poisoned, cfg.victim_arch, vc);
    save_classifier(victim.model, paths.victim_ckpt());
    return json{{"arch", cfg.victim_arch},
                {"final_train_accuracy", victim.final_train_accuracy}};
  });
  if (until == "train-victim") return result;

  run_phase(manifest, "train-victim-clean", {paths.victim_clean_ckpt()}, [&] {
    TrainConfig vc = cfg.victim_train;
    vc.seed = cfg.seeds.victim;
    TrainedClassifier clean = train_classifier(data.train, cfg.victim_arch, vc);
    save_classifier(clean.model, paths.victim_clean_ckpt());
    return json{{"arch", cfg.victim_arch},
                {"final_train_accuracy", clean.final_train_accuracy}};
  });
  if (until == "train-victim-clean") return result;

  ClassifierSplit victim = load_classifier(paths.victim_ckpt());
  ClassifierSplit clean_victim = load_classifier(paths.victim_clean_ckpt());
  result.clean_ba = accuracy(clean_victim, data.test);
  run_phase(manifest, "evaluate", {paths.report()}, [&] {
    AttackReport report =
        evaluate_attack(victim, gen, data.test, result.clean_ba, &clean_victim);
    write_text_file(paths.report(), report_to_json(report));
    return json{
        {"asr_avg", report.asr_avg}, {"ba", report.ba}, {"dv", report.dv}};
  });
  result.report = report_from_json(read_text_file(paths.report()));
  result.victim_ba = result.report.ba;
  return result;
}

}  // namespace ffcba
