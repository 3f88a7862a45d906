// Command-line surface for the attack toolkit: phase execution against a run
// directory, standalone dataset/checkpoint operations, defense evaluation and
// the kernel-regression oracle. Exit codes: 0 success, 2 validation error,
// 3 runtime failure, 4 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ffcba/defenses.hpp"
#include "ffcba/fmba.hpp"
#include "ffcba/fsba.hpp"
#include "ffcba/ntk.hpp"
#include "ffcba/run.hpp"
#include "ffcba/wavelet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ffcba;

namespace {

ExperimentConfig need_config(const std::string& path) {
  check(!path.empty(), "a --config file is required");
  return load_config_file(path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
}

// Poisoned probe inputs for STRIP: each test sample triggered toward a
// seeded random non-true target, the way attack inputs appear at inference.
Dataset make_poisoned_probe(const Dataset& test, TriggerGenerator& gen,
                            int count, uint64_t seed) {
  Rng rng(Rng::next_hash(seed, 0x9047eULL));
  Dataset probe;
  probe.channels = test.channels;
  probe.height = test.height;
  probe.width = test.width;
  probe.num_classes = test.num_classes;
  count = std::min(count, test.size());
  std::vector<int> order(test.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (int i = 0; i < count; ++i) {
    int idx = order[i];
    int target = rng.uniform_int(test.num_classes - 1);
    if (target >= test.labels[idx]) ++target;
    Tensor x = test.image(idx);
    Tensor triggered = apply_trigger(x, gen.generate(x, {target}, false));
    probe.images.insert(probe.images.end(), triggered.v.begin(), triggered.v.end());
    probe.labels.push_back(test.labels[idx]);
  }
  return probe;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"FFCBA clean-label full-target backdoor toolkit"};
  app.require_subcommand(1);

  std::string config_path, run_dir, out_path;
  bool force = false;

  auto add_phase_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--out", run_dir, "run directory")->required();
    cmd->add_flag("--force", force, "re-execute phases ignoring stamps");
  };

  // ---- phase subcommands
  auto* cmd_run = app.add_subcommand("run", "execute the full phase chain");
  add_phase_opts(cmd_run);
  auto* cmd_proxy = app.add_subcommand("train-proxy", "train the proxy classifier");
  add_phase_opts(cmd_proxy);

  auto* cmd_trigger =
      app.add_subcommand("train-trigger", "train the trigger generator");
  add_phase_opts(cmd_trigger);
  std::string paradigm_override;
  cmd_trigger->add_option("--paradigm", paradigm_override,
                          "override the config paradigm (fsba|fmba)");

  auto* cmd_poison = app.add_subcommand("poison", "build the poisoned dataset");
  std::string plan_path;
  cmd_poison->add_option("--plan", plan_path,
                         "standalone poison plan JSON (rate, seed, "
                         "generator_checkpoint, config, out_dir)");
  cmd_poison->add_option("--config", config_path, "experiment config JSON");
  cmd_poison->add_option("--out", run_dir, "run directory (phase mode)");
  cmd_poison->add_flag("--force", force, "re-execute phases ignoring stamps");

  auto* cmd_victim = app.add_subcommand("train-victim", "train a victim classifier");
  std::string data_dir, ckpt_out;
  cmd_victim->add_option("--data", data_dir,
                         "class-directory dataset to train on (standalone mode)");
  cmd_victim->add_option("--ckpt-out", ckpt_out, "checkpoint path (standalone mode)");
  cmd_victim->add_option("--config", config_path, "experiment config JSON");
  cmd_victim->add_option("--out", run_dir, "run directory (phase mode)");
  cmd_victim->add_flag("--force", force, "re-execute phases ignoring stamps");

  auto* cmd_eval = app.add_subcommand("evaluate", "evaluate the attack");
  std::string victim_path, generator_path, clean_victim_path;
  double clean_ba_arg = -1.0;
  cmd_eval->add_option("--victim", victim_path, "victim checkpoint (direct mode)");
  cmd_eval->add_option("--generator", generator_path,
                       "generator checkpoint (direct mode)");
  cmd_eval->add_option("--clean-victim", clean_victim_path,
                       "never-poisoned reference checkpoint");
  cmd_eval->add_option("--clean-ba", clean_ba_arg,
                       "reference benign accuracy when no clean model is given");
  cmd_eval->add_option("--config", config_path, "experiment config JSON");
  cmd_eval->add_option("--out", run_dir, "run directory (phase mode)");
  cmd_eval->add_option("--report", out_path, "report path (direct mode; stdout otherwise)");
  cmd_eval->add_flag("--force", force, "re-execute phases ignoring stamps");

  auto* cmd_sweep = app.add_subcommand("sweep", "poison-rate sweep");
  std::vector<double> rates;
  cmd_sweep->add_option("--rates", rates, "ascending poisoning rates")->required();
  cmd_sweep->add_option("--config", config_path, "experiment config JSON")->required();
  cmd_sweep->add_option("--out", run_dir, "run directory")->required();
  cmd_sweep->add_option("--report", out_path, "sweep report path");
  cmd_sweep->add_flag("--force", force, "re-execute phases ignoring stamps");

  auto* cmd_defend = app.add_subcommand("defend", "run a defense");
  cmd_defend->require_subcommand(1);
  auto* cmd_strip = cmd_defend->add_subcommand("strip", "entropy analysis");
  int strip_overlays = 16, strip_samples = 200;
  double strip_blend = 0.5;
  cmd_strip->add_option("--config", config_path, "experiment config JSON")->required();
  cmd_strip->add_option("--out", run_dir, "run directory")->required();
  cmd_strip->add_option("--overlays", strip_overlays, "overlay count per input");
  cmd_strip->add_option("--blend", strip_blend, "blend weight");
  cmd_strip->add_option("--samples", strip_samples, "probe inputs per population");
  cmd_strip->add_option("--report", out_path, "report path");

  auto* cmd_prune = cmd_defend->add_subcommand("fineprune", "channel pruning curve");
  std::vector<double> fractions{0.0, 0.2, 0.4, 0.6, 0.8, 0.95};
  cmd_prune->add_option("--config", config_path, "experiment config JSON")->required();
  cmd_prune->add_option("--out", run_dir, "run directory")->required();
  cmd_prune->add_option("--fractions", fractions, "ascending pruning fractions");
  cmd_prune->add_option("--report", out_path, "report path");

  auto* cmd_ntk = app.add_subcommand("verify-ntk", "kernel-regression ratio oracle");
  std::string ntk_dataset = "toy";
  int ntk_trials = 200, ntk_classes = 2, ntk_per_class = 100, ntk_dim = 16;
  double ntk_gamma = -1.0, ntk_mean_norm = 1.0, ntk_sigma = 0.3;
  double ntk_imbalance = 1.0;
  uint64_t ntk_seed = 1;
  cmd_ntk->add_option("--dataset", ntk_dataset, "toy | <csv file: label,v1,...>");
  cmd_ntk->add_option("--trials", ntk_trials, "cross-class pair count");
  cmd_ntk->add_option("--gamma", ntk_gamma, "kernel bandwidth; <=0 selects the median heuristic");
  cmd_ntk->add_option("--classes", ntk_classes, "toy class count");
  cmd_ntk->add_option("--per-class", ntk_per_class, "toy per-class count");
  cmd_ntk->add_option("--dim", ntk_dim, "toy dimensionality");
  cmd_ntk->add_option("--mean-norm", ntk_mean_norm, "toy class-mean norm");
  cmd_ntk->add_option("--sigma", ntk_sigma, "toy within-class spread");
  cmd_ntk->add_option("--imbalance", ntk_imbalance,
                      "multiply class 0's count by this factor");
  cmd_ntk->add_option("--seed", ntk_seed, "sampling seed");
  cmd_ntk->add_option("--report", out_path, "report path");

  auto* cmd_wavelet = app.add_subcommand("wavelet", "decomposition debug dump");
  std::string image_path, ref_path, dump_path;
  double wavelet_k = 1.5;
  cmd_wavelet->add_option("--image", image_path, "input PPM/PGM")->required();
  cmd_wavelet->add_option("--dump-pyramid", dump_path, "FFPY output path")->required();
  cmd_wavelet->add_option("--ref", ref_path, "mix this reference's detail bands first");
  cmd_wavelet->add_option("--k", wavelet_k, "mixing gain");

  CLI11_PARSE(app, argc, argv);

  if (*cmd_run) {
    RunResult r = run_experiment(need_config(config_path), run_dir, force);
    std::cout << read_text_file(r.paths.report());
    return 0;
  }
  if (*cmd_proxy) {
    run_experiment(need_config(config_path), run_dir, force, "train-proxy");
    std::cout << "proxy ready in " << run_dir << "\n";
    return 0;
  }
  if (*cmd_trigger) {
    ExperimentConfig cfg = need_config(config_path);
    if (!paradigm_override.empty()) {
      cfg.paradigm = paradigm_override;
      validate_config(cfg);
    }
    run_experiment(cfg, run_dir, force, "train-trigger");
    std::cout << "trigger generator ready in " << run_dir << "\n";
    return 0;
  }
  if (*cmd_poison) {
    if (!plan_path.empty()) {
      json plan = json::parse(read_text_file(plan_path));
      for (auto it = plan.begin(); it != plan.end(); ++it)
        check(std::set<std::string>{"rate", "seed", "generator_checkpoint",
                                    "config", "out_dir"}
                      .count(it.key()) > 0,
              "poison plan: unknown key \"" + it.key() + "\"");
      ExperimentConfig cfg = need_config(
          plan.contains("config") ? plan.at("config").get<std::string>()
                                  : config_path);
      PoisonPlan p;
      p.rate = plan.value("rate", cfg.poison_rate);
      p.seed = plan.value("seed", cfg.seeds.poison);
      p.generator_checkpoint = plan.at("generator_checkpoint").get<std::string>();
      std::string out_dir = plan.at("out_dir").get<std::string>();
      LoadedData data = load_dataset(cfg.dataset);
      TriggerGenerator gen = load_generator(p.generator_checkpoint);
      PoisonManifest pm;
      Dataset poisoned = build_poisoned_dataset(data.train, gen, p, &pm);
      fs::create_directories(out_dir);
      save_as_class_dirs(poisoned, out_dir + "/train");
      write_text_file(out_dir + "/poison_manifest.json", manifest_to_json(pm));
      std::cout << "poisoned dataset in " << out_dir << " ("
                << pm.entries.size() << " samples)\n";
      return 0;
    }
    check(!run_dir.empty(), "poison: need --plan or --config/--out");
    run_experiment(need_config(config_path), run_dir, force, "poison");
    std::cout << "poisoned dataset ready in " << run_dir << "\n";
    return 0;
  }
  if (*cmd_victim) {
    if (!data_dir.empty()) {
      ExperimentConfig cfg = need_config(config_path);
      check(!ckpt_out.empty(), "train-victim: --ckpt-out required with --data");
      Dataset train = load_class_dirs(data_dir);
      TrainConfig vc = cfg.victim_train;
      vc.seed = cfg.seeds.victim;
      TrainedClassifier victim = train_classifier(train, cfg.victim_arch, vc);
      save_classifier(victim.model, ckpt_out);
      std::cout << "victim checkpoint " << ckpt_out << " (train accuracy "
                << victim.final_train_accuracy << ")\n";
      return 0;
    }
    check(!run_dir.empty(), "train-victim: need --data or --config/--out");
    run_experiment(need_config(config_path), run_dir, force, "train-victim");
    std::cout << "victim ready in " << run_dir << "\n";
    return 0;
  }
  if (*cmd_eval) {
    ExperimentConfig cfg = need_config(config_path);
    if (!victim_path.empty() || !generator_path.empty()) {
      check(!victim_path.empty() && !generator_path.empty(),
            "evaluate: direct mode needs both --victim and --generator");
      LoadedData data = load_dataset(cfg.dataset);
      ClassifierSplit victim = load_classifier(victim_path);
      TriggerGenerator gen = load_generator(generator_path);
      double clean_ba = clean_ba_arg;
      std::unique_ptr<ClassifierSplit> clean_model;
      if (!clean_victim_path.empty()) {
        clean_model = std::make_unique<ClassifierSplit>(
            load_classifier(clean_victim_path));
        clean_ba = accuracy(*clean_model, data.test);
      }
      check(clean_ba >= 0.0,
            "evaluate: provide --clean-victim or --clean-ba for the DV reference");
      AttackReport report = evaluate_attack(victim, gen, data.test, clean_ba,
                                            clean_model.get());
      emit(out_path, report_to_json(report));
      return 0;
    }
    check(!run_dir.empty(), "evaluate: need --victim/--generator or --out");
    RunResult r = run_experiment(cfg, run_dir, force);
    std::cout << read_text_file(r.paths.report());
    return 0;
  }
  if (*cmd_sweep) {
    ExperimentConfig cfg = need_config(config_path);
    RunResult base = run_experiment(cfg, run_dir, force, "train-victim-clean");
    LoadedData data = load_dataset(cfg.dataset);
    TriggerGenerator gen = load_generator(base.paths.generator_ckpt());
    ClassifierSplit clean_victim = load_classifier(base.paths.victim_clean_ckpt());
    double clean_ba = accuracy(clean_victim, data.test);
    TrainConfig vc = cfg.victim_train;
    vc.seed = cfg.seeds.victim;
    SweepResult sweep = poison_rate_sweep(data.train, data.test, gen,
                                          cfg.victim_arch, vc, clean_ba, rates,
                                          cfg.seeds.poison);
    json j;
    j["points"] = json::array();
    for (const auto& p : sweep.points)
      j["points"].push_back({{"rate", p.rate}, {"asr_avg", p.asr_avg}});
    j["nondecreasing_within_0.05"] = sweep.nondecreasing_within(0.05);
    emit(out_path.empty() ? run_dir + "/sweep.json" : out_path, j.dump(2) + "\n");
    return 0;
  }
  if (*cmd_strip) {
    ExperimentConfig cfg = need_config(config_path);
    RunResult base = run_experiment(cfg, run_dir, false);
    LoadedData data = load_dataset(cfg.dataset);
    ClassifierSplit victim = load_classifier(base.paths.victim_ckpt());
    TriggerGenerator gen = load_generator(base.paths.generator_ckpt());
    StripParams params;
    params.overlays = strip_overlays;
    params.blend = strip_blend;
    params.seed = cfg.seeds.eval;
    std::vector<int> clean_idx;
    for (int i = 0; i < std::min(strip_samples, data.test.size()); ++i)
      clean_idx.push_back(i);
    Dataset clean_probe = subset(data.test, clean_idx);
    Dataset poisoned_probe =
        make_poisoned_probe(data.test, gen, strip_samples, cfg.seeds.eval);
    StripResult result =
        strip_compare(victim, clean_probe, poisoned_probe, data.train, params);
    json j;
    j["ks"] = result.ks;
    j["detection_rate_at_1pct_frr"] = result.detection_rate_at_1pct_frr;
    j["degenerate"] = result.degenerate;
    j["bin_upper_nats"] = std::log(static_cast<double>(data.test.num_classes));
    j["clean_hist"] = entropy_histogram(result.clean.entropies, data.test.num_classes);
    j["poisoned_hist"] =
        entropy_histogram(result.poisoned.entropies, data.test.num_classes);
    emit(out_path.empty() ? run_dir + "/defense_strip.json" : out_path,
         j.dump(2) + "\n");
    return 0;
  }
  if (*cmd_prune) {
    ExperimentConfig cfg = need_config(config_path);
    RunResult base = run_experiment(cfg, run_dir, false);
    LoadedData data = load_dataset(cfg.dataset);
    ClassifierSplit victim = load_classifier(base.paths.victim_ckpt());
    TriggerGenerator gen = load_generator(base.paths.generator_ckpt());
    std::vector<int> rank_idx;
    for (int i = 0; i < std::min(256, data.test.size()); ++i)
      rank_idx.push_back(i);
    Dataset rank_subset = subset(data.test, rank_idx);
    auto curve = fine_prune(victim, rank_subset, last_conv_index(victim), fractions,
                            [&](ClassifierSplit& m) {
                              return std::make_pair(accuracy(m, data.test),
                                                    average_asr(m, gen, data.test));
                            });
    json j;
    j["points"] = json::array();
    for (const auto& p : curve)
      j["points"].push_back(
          {{"fraction", p.fraction}, {"ba", p.ba}, {"asr_avg", p.asr_avg}});
    emit(out_path.empty() ? run_dir + "/defense_fineprune.json" : out_path,
         j.dump(2) + "\n");
    return 0;
  }
  if (*cmd_ntk) {
    KernelDataset ds;
    if (ntk_dataset == "toy") {
      std::vector<GaussianClassSpec> specs(ntk_classes);
      for (auto& s : specs) {
        s.count = ntk_per_class;
        s.mean_norm = ntk_mean_norm;
        s.sigma = ntk_sigma;
      }
      specs[0].count = static_cast<int>(ntk_per_class * ntk_imbalance);
      ds = make_gaussian_classes(specs, ntk_dim, ntk_gamma, ntk_seed);
    } else {
      // CSV rows: label,v1,v2,...
      std::ifstream f(ntk_dataset);
      if (!f) throw IoError("cannot open " + ntk_dataset);
      std::vector<std::vector<float>> rows;
      std::vector<int> labels;
      std::string line;
      int max_label = 0;
      while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        labels.push_back(std::stoi(cell));
        max_label = std::max(max_label, labels.back());
        std::vector<float> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stof(cell));
        check(rows.empty() || vals.size() == rows.front().size(),
              "verify-ntk: ragged CSV rows");
        rows.push_back(std::move(vals));
      }
      check(!rows.empty(), "verify-ntk: empty CSV");
      ds.num_classes = max_label + 1;
      ds.labels = labels;
      ds.samples = Tensor::matrix(static_cast<int>(rows.size()),
                                  static_cast<int>(rows.front().size()));
      for (size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(),
                  ds.samples.data() + i * rows.front().size());
      ds.gamma = ntk_gamma > 0.0 ? ntk_gamma : median_heuristic_gamma(ds);
    }
    Assumption1Report report = verify_assumption1(ds, ntk_trials, ntk_seed);
    json j;
    j["gamma"] = ds.gamma;
    j["trials"] = ntk_trials;
    j["geometric_mean_ratio"] = report.geometric_mean;
    j["max_abs_log_ratio"] = report.max_abs_log_ratio;
    j["degenerate_count"] = report.degenerate_count;
    j["ratios"] = report.ratios;
    emit(out_path, j.dump(2) + "\n");
    return 0;
  }
  if (*cmd_wavelet) {
    Tensor image = load_image_file(image_path);
    check(image.h % 4 == 0 && image.w % 4 == 0,
          "wavelet: image dimensions must be divisible by 4");
    if (!ref_path.empty()) {
      Tensor ref = load_image_file(ref_path);
      image = perturb_midhigh(image, ref, static_cast<float>(wavelet_k));
    }
    dump_pyramid(sdwt_decompose(image), dump_path);
    std::cout << "wrote " << dump_path << "\n";
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
