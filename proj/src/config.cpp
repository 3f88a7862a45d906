#include "ffcba/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ffcba/pipeline.hpp"

namespace ffcba {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    check(allowed.count(it.key()) > 0,
          "config: unknown key \"" + it.key() + "\" in " + where);
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void parse_train(const json& obj, const std::string& where, TrainConfig& out) {
  reject_unknown_keys(obj,
                      {"optimizer", "lr", "momentum", "lr_decay",
                       "lr_decay_every", "epochs", "batch_size"},
                      where);
  get_if(obj, "optimizer", out.optimizer);
  get_if(obj, "lr", out.lr);
  get_if(obj, "momentum", out.momentum);
  get_if(obj, "lr_decay", out.lr_decay);
  get_if(obj, "lr_decay_every", out.lr_decay_every);
  get_if(obj, "epochs", out.epochs);
  get_if(obj, "batch_size", out.batch_size);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"dataset", "proxy_arch", "victim_arch", "paradigm",
                       "epsilon", "psnr_thresh", "k", "alpha", "beta", "gamma",
                       "poison_rate", "proxy_train", "victim_train",
                       "trigger_train", "seeds"},
                      "the top level");
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown_keys(d,
                        {"name", "path", "train_files", "test_files",
                         "image_size", "channels", "num_classes",
                         "train_per_class", "test_per_class", "seed",
                         "noise_std", "background_mix", "translate_px",
                         "texture_amp", "styles_per_class", "hard_fraction"},
                        "dataset");
    get_if(d, "name", cfg.dataset.name);
    get_if(d, "path", cfg.dataset.path);
    get_if(d, "train_files", cfg.dataset.train_files);
    get_if(d, "test_files", cfg.dataset.test_files);
    get_if(d, "image_size", cfg.dataset.image_size);
    get_if(d, "channels", cfg.dataset.channels);
    get_if(d, "num_classes", cfg.dataset.num_classes);
    get_if(d, "train_per_class", cfg.dataset.train_per_class);
    get_if(d, "test_per_class", cfg.dataset.test_per_class);
    get_if(d, "seed", cfg.dataset.seed);
    get_if(d, "noise_std", cfg.dataset.noise_std);
    get_if(d, "background_mix", cfg.dataset.background_mix);
    get_if(d, "translate_px", cfg.dataset.translate_px);
    get_if(d, "texture_amp", cfg.dataset.texture_amp);
    get_if(d, "styles_per_class", cfg.dataset.styles_per_class);
    get_if(d, "hard_fraction", cfg.dataset.hard_fraction);
  }
  get_if(j, "proxy_arch", cfg.proxy_arch);
  get_if(j, "victim_arch", cfg.victim_arch);
  get_if(j, "paradigm", cfg.paradigm);
  get_if(j, "epsilon", cfg.epsilon);
  get_if(j, "psnr_thresh", cfg.psnr_thresh);
  get_if(j, "k", cfg.k);
  get_if(j, "alpha", cfg.alpha);
  get_if(j, "beta", cfg.beta);
  get_if(j, "gamma", cfg.gamma);
  get_if(j, "poison_rate", cfg.poison_rate);
  if (j.contains("proxy_train"))
    parse_train(j.at("proxy_train"), "proxy_train", cfg.proxy_train);
  if (j.contains("victim_train"))
    parse_train(j.at("victim_train"), "victim_train", cfg.victim_train);
  if (j.contains("trigger_train")) {
    const json& t = j.at("trigger_train");
    reject_unknown_keys(t,
                        {"epochs", "stage1_epochs", "stage2_epochs",
                         "batch_size", "lr", "stage2_gamma"},
                        "trigger_train");
    // Eq.-13 schedule rule: the in-class fine-tuning stage has no visual term
    if (t.contains("stage2_gamma") && !t.at("stage2_gamma").is_null())
      throw ValidationError(
          "config: stage2_gamma is not a degree of freedom; the in-class "
          "fine-tuning stage omits the visual term");
    get_if(t, "epochs", cfg.trigger_train.epochs);
    get_if(t, "stage1_epochs", cfg.trigger_train.stage1_epochs);
    get_if(t, "stage2_epochs", cfg.trigger_train.stage2_epochs);
    get_if(t, "batch_size", cfg.trigger_train.batch_size);
    get_if(t, "lr", cfg.trigger_train.lr);
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    reject_unknown_keys(s, {"proxy", "trigger", "poison", "victim", "eval"},
                        "seeds");
    get_if(s, "proxy", cfg.seeds.proxy);
    get_if(s, "trigger", cfg.seeds.trigger);
    get_if(s, "poison", cfg.seeds.poison);
    get_if(s, "victim", cfg.seeds.victim);
    get_if(s, "eval", cfg.seeds.eval);
  }
  cfg.proxy_train.seed = cfg.seeds.proxy;
  cfg.victim_train.seed = cfg.seeds.victim;
  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"name", cfg.dataset.name},
                  {"path", cfg.dataset.path},
                  {"train_files", cfg.dataset.train_files},
                  {"test_files", cfg.dataset.test_files},
                  {"image_size", cfg.dataset.image_size},
                  {"channels", cfg.dataset.channels},
                  {"num_classes", cfg.dataset.num_classes},
                  {"train_per_class", cfg.dataset.train_per_class},
                  {"test_per_class", cfg.dataset.test_per_class},
                  {"seed", cfg.dataset.seed},
                  {"noise_std", cfg.dataset.noise_std},
                  {"background_mix", cfg.dataset.background_mix},
                  {"translate_px", cfg.dataset.translate_px},
                  {"texture_amp", cfg.dataset.texture_amp},
                  {"styles_per_class", cfg.dataset.styles_per_class},
                  {"hard_fraction", cfg.dataset.hard_fraction}};
  j["proxy_arch"] = cfg.proxy_arch;
  j["victim_arch"] = cfg.victim_arch;
  j["paradigm"] = cfg.paradigm;
  j["epsilon"] = cfg.epsilon;
  j["psnr_thresh"] = cfg.psnr_thresh;
  j["k"] = cfg.k;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["poison_rate"] = cfg.poison_rate;
  auto train_json = [](const TrainConfig& t) {
    return json{{"optimizer", t.optimizer},   {"lr", t.lr},
                {"momentum", t.momentum},     {"lr_decay", t.lr_decay},
                {"lr_decay_every", t.lr_decay_every}, {"epochs", t.epochs},
                {"batch_size", t.batch_size}};
  };
  j["proxy_train"] = train_json(cfg.proxy_train);
  j["victim_train"] = train_json(cfg.victim_train);
  j["trigger_train"] = {{"epochs", cfg.trigger_train.epochs},
                        {"stage1_epochs", cfg.trigger_train.stage1_epochs},
                        {"stage2_epochs", cfg.trigger_train.stage2_epochs},
                        {"batch_size", cfg.trigger_train.batch_size},
                        {"lr", cfg.trigger_train.lr}};
  j["seeds"] = {{"proxy", cfg.seeds.proxy},
                {"trigger", cfg.seeds.trigger},
                {"poison", cfg.seeds.poison},
                {"victim", cfg.seeds.victim},
                {"eval", cfg.seeds.eval}};
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::string text = config_to_json(cfg);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  check(d.name == "toy" || d.name == "dir" || d.name == "binary",
        "config: dataset.name must be toy, dir or binary");
  check(d.image_size >= 8, "config: dataset.image_size too small");
  check(d.image_size % 4 == 0,
        "config: dataset.image_size must be divisible by 4 (two dyadic wavelet "
        "levels); foreign sizes are center-cropped by the loader");
  check(d.channels == 1 || d.channels == 3, "config: channels must be 1 or 3");
  check(d.num_classes >= 2, "config: need at least two classes");
  if (d.name == "toy") {
    check(d.train_per_class >= 1 && d.test_per_class >= 1,
          "config: toy dataset needs positive per-class counts");
    check(d.noise_std >= 0.0 && d.background_mix >= 0.0 && d.translate_px >= 0,
          "config: toy texture knobs must be non-negative");
    check(d.texture_amp > 0.0 && d.styles_per_class >= 1,
          "config: toy texture knobs must be positive");
    check(d.hard_fraction >= 0.0 && d.hard_fraction <= 1.0,
          "config: hard_fraction must lie in [0,1]");
  }
  if (d.name == "dir") check(!d.path.empty(), "config: dir dataset needs a path");
  if (d.name == "binary")
    check(!d.train_files.empty() && !d.test_files.empty(),
          "config: binary dataset needs train_files and test_files");
  for (const auto& arch : {cfg.proxy_arch, cfg.victim_arch}) {
    auto known = ClassifierSplit::known_archs();
    check(std::find(known.begin(), known.end(), arch) != known.end(),
          "config: unknown architecture " + arch);
  }
  check(cfg.paradigm == "fsba" || cfg.paradigm == "fmba",
        "config: paradigm must be fsba or fmba");
  check(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0,
        "config: epsilon must lie in (0,1] on normalized pixels");
  check(cfg.psnr_thresh > 0.0, "config: psnr_thresh must be positive");
  check(cfg.k > 1.0, "config: the mixing gain k must exceed 1");
  check(cfg.alpha >= 0.0 && cfg.beta >= 0.0 && cfg.gamma >= 0.0,
        "config: loss weights must be non-negative");
  check(cfg.poison_rate >= 0.0 && cfg.poison_rate <= 1.0,
        "config: poison_rate must lie in [0,1]");
  for (const auto* t : {&cfg.proxy_train, &cfg.victim_train}) {
    check(t->lr > 0.0f, "config: classifier learning rates must be positive");
    check(t->epochs >= 0 && t->batch_size >= 1, "config: bad classifier schedule");
    check(t->optimizer == "sgd_momentum" || t->optimizer == "adam",
          "config: unknown optimizer " + t->optimizer);
  }
  check(cfg.trigger_train.lr > 0.0, "config: trigger learning rate must be positive");
  check(cfg.trigger_train.epochs >= 0 && cfg.trigger_train.stage1_epochs >= 0 &&
            cfg.trigger_train.stage2_epochs >= 0,
        "config: trigger epoch counts must be >= 0");
  check(cfg.trigger_train.batch_size >= 1, "config: trigger batch size must be >= 1");
  // fail early when Table-6 output paddings cannot reproduce the resolution
  TriggerGenerator::solve_output_padding(d.image_size);
}

LoadedData load_dataset(const DatasetSpec& spec) {
  LoadedData out;
  if (spec.name == "toy") {
    ToyParams p;
    p.num_classes = spec.num_classes;
    p.image_size = spec.image_size;
    p.channels = spec.channels;
    p.seed = spec.seed;
    p.noise_std = static_cast<float>(spec.noise_std);
    p.background_mix = static_cast<float>(spec.background_mix);
    p.translate_px = spec.translate_px;
    p.texture_amp = static_cast<float>(spec.texture_amp);
    p.styles_per_class = spec.styles_per_class;
    p.hard_fraction = static_cast<float>(spec.hard_fraction);
    out.train = make_toy_dataset(p, spec.train_per_class, 1);
    out.test = make_toy_dataset(p, spec.test_per_class, 2);
    return out;
  }
  if (spec.name == "dir") {
    out.train = load_class_dirs(spec.path + "/train");
    out.test = load_class_dirs(spec.path + "/test");
  } else {
    out.train = load_binary_archive(spec.train_files, spec.channels,
                                    spec.image_size, spec.image_size,
                                    spec.num_classes);
    out.test = load_binary_archive(spec.test_files, spec.channels,
                                   spec.image_size, spec.image_size,
                                   spec.num_classes);
  }
  check(out.train.num_classes == out.test.num_classes,
        "dataset: train/test class count mismatch");
  int target = std::min({out.train.height, out.train.width, spec.image_size});
  target -= target % 4;
  check(target >= 8, "dataset: images too small after cropping to the 4-grid");
  if (target != out.train.height || target != out.train.width) {
    out.train = center_crop(out.train, target, target);
    out.cropped_to = target;
  }
  if (target != out.test.height || target != out.test.width)
    out.test = center_crop(out.test, target, target);
  return out;
}

}  // namespace ffcba
