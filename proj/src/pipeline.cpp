#include "ffcba/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "ffcba/losses.hpp"
#include "ffcba/rng.hpp"

namespace ffcba {

using nlohmann::json;

Dataset build_poisoned_dataset(const Dataset& ds, TriggerGenerator& gen,
                               const PoisonPlan& plan, PoisonManifest* manifest) {
  check(plan.rate >= 0.0 && plan.rate <= 1.0, "poison plan: rate must be in [0,1]");
  check(ds.size() > 0, "poison plan: empty dataset");
  check(ds.num_classes == gen.num_classes(),
        "poison plan: generator class count does not match the dataset");

  int np = static_cast<int>(plan.rate * ds.size());
  int per_class = np / ds.num_classes;
  auto by_class = ds.indices_by_class();
  for (int k = 0; k < ds.num_classes; ++k)
    check(per_class <= static_cast<int>(by_class[k].size()),
          "poison plan: class " + std::to_string(k) + " has only " +
              std::to_string(by_class[k].size()) + " samples, need " +
              std::to_string(per_class));

  PoisonManifest m;
  m.per_class_count = per_class;
  m.rate = plan.rate;
  m.seed = plan.seed;
  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx",
                static_cast<unsigned long long>(gen.param_hash()));
  m.generator_checksum = checksum;

  Dataset out = ds;
  Rng rng(Rng::next_hash(plan.seed, 0x9015eedULL));
  for (int k = 0; k < ds.num_classes; ++k) {
    Rng crng = rng.fork(k);
    std::vector<int> order = by_class[k];
    crng.shuffle(order);
    for (int i = 0; i < per_class; ++i) {
      int idx = order[i];
      Tensor x = ds.image(idx);
      Tensor trigger = gen.generate(x, {k}, false);
      Tensor poisoned = quantize255(apply_trigger(x, trigger));
      out.set_image(idx, poisoned);
      m.entries.push_back({idx, k});
    }
  }
  if (manifest) *manifest = std::move(m);
  return out;
}

std::string manifest_to_json(const PoisonManifest& m) {
  json j;
  j["per_class_count"] = m.per_class_count;
  j["rate"] = m.rate;
  j["seed"] = m.seed;
  j["generator_checksum"] = m.generator_checksum;
  json entries = json::array();
  for (const auto& e : m.entries)
    entries.push_back({{"index", e.index}, {"class", e.class_id}});
  j["entries"] = entries;
  return j.dump(2) + "\n";
}

PoisonManifest manifest_from_json(const std::string& text) {
  json j = json::parse(text);
  PoisonManifest m;
  m.per_class_count = j.at("per_class_count").get<int>();
  m.rate = j.at("rate").get<double>();
  m.seed = j.at("seed").get<uint64_t>();
  m.generator_checksum = j.at("generator_checksum").get<std::string>();
  for (const auto& e : j.at("entries"))
    m.entries.push_back({e.at("index").get<int>(), e.at("class").get<int>()});
  return m;
}

std::string report_to_json(const AttackReport& r) {
  json j;
  j["asr_per_class"] = r.asr_per_class;
  j["asr_avg"] = r.asr_avg;
  j["ba"] = r.ba;
  j["dv"] = r.dv;
  j["psnr_mean"] = r.psnr_mean;
  j["ssim_mean"] = r.ssim_mean;
  if (r.adversarial_baseline_rate.has_value())
    j["adversarial_baseline_rate"] = *r.adversarial_baseline_rate;
  else
    j["adversarial_baseline_rate"] = nullptr;
  return j.dump(2) + "\n";
}

AttackReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  AttackReport r;
  r.asr_per_class = j.at("asr_per_class").get<std::vector<double>>();
  r.asr_avg = j.at("asr_avg").get<double>();
  r.ba = j.at("ba").get<double>();
  r.dv = j.at("dv").get<double>();
  r.psnr_mean = j.at("psnr_mean").get<double>();
  r.ssim_mean = j.at("ssim_mean").get<double>();
  if (!j.at("adversarial_baseline_rate").is_null())
    r.adversarial_baseline_rate = j.at("adversarial_baseline_rate").get<double>();
  return r;
}

AttackReport evaluate_attack(ClassifierSplit& victim, TriggerGenerator& gen,
                             const Dataset& test, double clean_reference_ba,
                             ClassifierSplit* clean_model) {
  check(test.size() > 0, "evaluate_attack: empty test set");
  check(victim.frozen(), "evaluate_attack: victim must be frozen");
  int k = victim.num_classes();
  check(test.num_classes == k, "evaluate_attack: class count mismatch");

  AttackReport report;
  report.ba = accuracy(victim, test);
  report.dv = clean_reference_ba - report.ba;
  report.asr_per_class.assign(k, 0.0);

  const int bs = 128;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  long pair_count = 0, psnr_inf = 0;
  long baseline_hits = 0, baseline_total = 0;

  for (int target = 0; target < k; ++target) {
    long hits = 0, total = 0;
    for (int start = 0; start < test.size(); start += bs) {
      int end = std::min(test.size(), start + bs);
      std::vector<int> idx;
      for (int i = start; i < end; ++i)
        if (test.labels[i] != target) idx.push_back(i);
      if (idx.empty()) continue;
      Tensor clean = test.gather(idx);
      std::vector<int> cond(idx.size(), target);
      Tensor trigger = gen.generate(clean, cond, false);
      Tensor triggered = clamp01(add(clean, trigger));
      auto preds = predict(victim, triggered);
      for (size_t i = 0; i < idx.size(); ++i)
        if (preds[i] == target) ++hits;
      total += static_cast<long>(idx.size());
      if (clean_model) {
        auto base_preds = predict(*clean_model, triggered);
        for (size_t i = 0; i < idx.size(); ++i)
          if (base_preds[i] == target) ++baseline_hits;
        baseline_total += static_cast<long>(idx.size());
      }
      for (int r = 0; r < clean.n; ++r) {
        Tensor a(1, clean.c, clean.h, clean.w), b(1, clean.c, clean.h, clean.w);
        std::memcpy(a.data(), clean.slice(r), a.numel() * sizeof(float));
        std::memcpy(b.data(), triggered.slice(r), b.numel() * sizeof(float));
        double p = psnr(a, b);
        if (std::isinf(p)) {
          ++psnr_inf;
          psnr_sum += kPsnrCapDb;
        } else {
          psnr_sum += std::min(p, kPsnrCapDb);
        }
        ssim_sum += ssim(a, b);
        ++pair_count;
      }
    }
    check(total > 0, "evaluate_attack: no off-target samples for class " +
                         std::to_string(target));
    report.asr_per_class[target] = static_cast<double>(hits) / total;
  }
  double asr_total = 0.0;
  for (double a : report.asr_per_class) asr_total += a;
  report.asr_avg = asr_total / k;
  report.psnr_mean = psnr_inf == pair_count
                         ? std::numeric_limits<double>::infinity()
                         : psnr_sum / pair_count;
  report.ssim_mean = ssim_sum / pair_count;
  if (clean_model)
    report.adversarial_baseline_rate =
        static_cast<double>(baseline_hits) / baseline_total;
  return report;
}

std::vector<double> asr_per_class(ClassifierSplit& victim, TriggerGenerator& gen,
                                  const Dataset& test) {
  check(test.size() > 0, "asr_per_class: empty test set");
  int k = victim.num_classes();
  std::vector<double> out(k, 0.0);
  const int bs = 128;
  for (int target = 0; target < k; ++target) {
    long hits = 0, total = 0;
    for (int start = 0; start < test.size(); start += bs) {
      int end = std::min(test.size(), start + bs);
      std::vector<int> idx;
      for (int i = start; i < end; ++i)
        if (test.labels[i] != target) idx.push_back(i);
      if (idx.empty()) continue;
      Tensor clean = test.gather(idx);
      std::vector<int> cond(idx.size(), target);
      Tensor triggered = clamp01(add(clean, gen.generate(clean, cond, false)));
      auto preds = predict(victim, triggered);
      for (size_t i = 0; i < idx.size(); ++i)
        if (preds[i] == target) ++hits;
      total += static_cast<long>(idx.size());
    }
    check(total > 0,
          "asr_per_class: no off-target samples for class " + std::to_string(target));
    out[target] = static_cast<double>(hits) / total;
  }
  return out;
}

double average_asr(ClassifierSplit& victim, TriggerGenerator& gen,
                   const Dataset& test) {
  auto per_class = asr_per_class(victim, gen, test);
  double total = 0.0;
  for (double a : per_class) total += a;
  return total / per_class.size();
}

bool SweepResult::nondecreasing_within(double tol) const {
  for (size_t i = 1; i < points.size(); ++i)
    if (points[i].asr_avg < points[i - 1].asr_avg - tol) return false;
  return true;
}

SweepResult poison_rate_sweep(const Dataset& train, const Dataset& test,
                              TriggerGenerator& gen,
                              const std::string& victim_arch,
                              const TrainConfig& victim_cfg, double clean_ba,
                              const std::vector<double>& rates,
                              uint64_t poison_seed) {
  check(!rates.empty(), "poison_rate_sweep: no rates given");
  for (size_t i = 0; i < rates.size(); ++i) {
    check(rates[i] >= 0.0 && rates[i] <= 1.0,
          "poison_rate_sweep: rates must lie in [0,1]");
    if (i > 0)
      check(rates[i] >= rates[i - 1],
            "poison_rate_sweep: rates must be sorted ascending");
  }
  SweepResult result;
  for (double rate : rates) {
    PoisonPlan plan;
    plan.rate = rate;
    plan.seed = poison_seed;
    Dataset poisoned = build_poisoned_dataset(train, gen, plan, nullptr);
    TrainedClassifier victim = train_classifier(poisoned, victim_arch, victim_cfg);
    AttackReport report = evaluate_attack(victim.model, gen, test, clean_ba);
    result.points.push_back({rate, report.asr_avg});
  }
  return result;
}

// -------------------------------------------------------------------- SSIM

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;  // (k1 * L)^2, L = 1
constexpr double kSsimC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
  std::vector<double> kern(kSsimWindow);
  double sum = 0.0;
  int half = kSsimWindow / 2;
  for (int i = 0; i < kSsimWindow; ++i) {
    double d = i - half;
    kern[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += kern[i];
  }
  for (auto& v : kern) v /= sum;
  return kern;
}

// separable valid-mode Gaussian filter of a plane
void filter_valid(const float* src, int h, int w, const std::vector<double>& kern,
                  std::vector<double>& tmp, std::vector<double>& dst) {
  int vw = w - kSsimWindow + 1, vh = h - kSsimWindow + 1;
  tmp.assign(static_cast<size_t>(h) * vw, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) acc += kern[t] * src[y * w + x + t];
      tmp[static_cast<size_t>(y) * vw + x] = acc;
    }
  dst.assign(static_cast<size_t>(vh) * vw, 0.0);
  for (int y = 0; y < vh; ++y)
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kSsimWindow; ++t)
        acc += kern[t] * tmp[static_cast<size_t>(y + t) * vw + x];
      dst[static_cast<size_t>(y) * vw + x] = acc;
    }
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "ssim: shape mismatch");
  check(a.n == 1, "ssim: expected single images");
  check(a.h >= kSsimWindow && a.w >= kSsimWindow,
        "ssim: image smaller than the 11x11 window");
  static const std::vector<double> kern = gaussian_kernel();
  int h = a.h, w = a.w, plane = h * w;
  std::vector<float> prod(static_cast<size_t>(plane));
  std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
  double total = 0.0;
  long count = 0;
  for (int c = 0; c < a.c; ++c) {
    const float* pa = a.data() + static_cast<size_t>(c) * plane;
    const float* pb = b.data() + static_cast<size_t>(c) * plane;
    filter_valid(pa, h, w, kern, tmp, mu_a);
    filter_valid(pb, h, w, kern, tmp, mu_b);
    for (int i = 0; i < plane; ++i) prod[i] = pa[i] * pa[i];
    filter_valid(prod.data(), h, w, kern, tmp, m_aa);
    for (int i = 0; i < plane; ++i) prod[i] = pb[i] * pb[i];
    filter_valid(prod.data(), h, w, kern, tmp, m_bb);
    for (int i = 0; i < plane; ++i) prod[i] = pa[i] * pb[i];
    filter_valid(prod.data(), h, w, kern, tmp, m_ab);
    for (size_t i = 0; i < mu_a.size(); ++i) {
      double va = m_aa[i] - mu_a[i] * mu_a[i];
      double vb = m_bb[i] - mu_b[i] * mu_b[i];
      double cov = m_ab[i] - mu_a[i] * mu_b[i];
      double num = (2.0 * mu_a[i] * mu_b[i] + kSsimC1) * (2.0 * cov + kSsimC2);
      double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kSsimC1) * (va + vb + kSsimC2);
      total += num / den;
      ++count;
    }
  }
  return total / count;
}

VisualStats visual_report(const Tensor& clean_batch, const Tensor& poisoned_batch) {
  check(clean_batch.same_shape(poisoned_batch), "visual_report: shape mismatch");
  check(clean_batch.n > 0, "visual_report: empty batch");
  VisualStats stats;
  long inf_count = 0;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (int ni = 0; ni < clean_batch.n; ++ni) {
    Tensor a(1, clean_batch.c, clean_batch.h, clean_batch.w);
    Tensor b(1, clean_batch.c, clean_batch.h, clean_batch.w);
    std::memcpy(a.data(), clean_batch.slice(ni), a.numel() * sizeof(float));
    std::memcpy(b.data(), poisoned_batch.slice(ni), b.numel() * sizeof(float));
    double p = psnr(a, b);
    if (std::isinf(p)) {
      ++inf_count;
      psnr_sum += kPsnrCapDb;
    } else {
      psnr_sum += std::min(p, kPsnrCapDb);
    }
    ssim_sum += ssim(a, b);
  }
  stats.psnr_mean = inf_count == clean_batch.n
                        ? std::numeric_limits<double>::infinity()
                        : psnr_sum / clean_batch.n;
  stats.ssim_mean = ssim_sum / clean_batch.n;
  return stats;
}

}  // namespace ffcba
