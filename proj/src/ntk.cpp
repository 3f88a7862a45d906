#include "ffcba/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffcba/rng.hpp"

namespace ffcba {

namespace {

void check_dataset(const KernelDataset& ds) {
  check(ds.samples.n > 0, "ntk: empty dataset");
  check(ds.gamma > 0.0, "ntk: gamma must be positive");
  check(static_cast<int>(ds.labels.size()) == ds.samples.n,
        "ntk: one label per sample required");
  check(ds.num_classes >= 1, "ntk: class count missing");
  for (int l : ds.labels)
    check(l >= 0 && l < ds.num_classes, "ntk: label out of range");
}

double sq_dist(const float* a, const float* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    double diff = static_cast<double>(a[i]) - b[i];
    s += diff * diff;
  }
  return s;
}

// log of the kernel mass of one class at x
double log_class_mass(const KernelDataset& ds, const Tensor& x, int cls) {
  int d = ds.samples.c;
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents;
  for (int i = 0; i < ds.samples.n; ++i) {
    if (ds.labels[i] != cls) continue;
    double e = -2.0 * ds.gamma *
               sq_dist(x.data(), ds.samples.data() + static_cast<size_t>(i) * d, d);
    exponents.push_back(e);
    mx = std::max(mx, e);
  }
  check(!exponents.empty(),
        "ntk: class " + std::to_string(cls) + " has no samples");
  double sum = 0.0;
  for (double e : exponents) sum += std::exp(e - mx);
  return mx + std::log(sum);
}

}  // namespace

std::vector<long> KernelDataset::class_counts() const {
  std::vector<long> counts(num_classes, 0);
  for (int l : labels) counts[l]++;
  return counts;
}

std::vector<double> ntk_predict(const KernelDataset& ds, const Tensor& x) {
  check_dataset(ds);
  check(x.n == 1 && x.c == ds.samples.c,
        "ntk_predict: input dimension mismatch");
  std::vector<double> logmass(ds.num_classes);
  double mx = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < ds.num_classes; ++k) {
    logmass[k] = log_class_mass(ds, x, k);
    mx = std::max(mx, logmass[k]);
  }
  double total = 0.0;
  for (double lm : logmass) total += std::exp(lm - mx);
  std::vector<double> probs(ds.num_classes);
  for (int k = 0; k < ds.num_classes; ++k)
    probs[k] = std::exp(logmass[k] - mx) / total;
  return probs;
}

double class_ratio(const KernelDataset& ds, const Tensor& x, int a, int b,
                   bool* degenerate) {
  check_dataset(ds);
  check(a != b, "class_ratio: classes must differ");
  check(a >= 0 && a < ds.num_classes && b >= 0 && b < ds.num_classes,
        "class_ratio: class index out of range");
  check(x.n == 1 && x.c == ds.samples.c, "class_ratio: input dimension mismatch");
  double la = log_class_mass(ds, x, a);
  double lb = log_class_mass(ds, x, b);
  if (degenerate) {
    constexpr double kTinyLog = -690.77552789821368;  // ln(1e-300)
    *degenerate = la < kTinyLog || lb < kTinyLog;
  }
  return std::exp(la - lb);
}

Assumption1Report verify_assumption1(const KernelDataset& ds, int trials,
                                     uint64_t seed) {
  check_dataset(ds);
  check(ds.num_classes >= 2, "verify_assumption1: need at least two classes");
  check(trials >= 1, "verify_assumption1: trials must be >= 1");
  auto counts = ds.class_counts();
  int populated = 0;
  for (long c : counts)
    if (c > 0) ++populated;
  check(populated >= 2, "verify_assumption1: need samples from two classes");

  std::vector<std::vector<int>> by_class(ds.num_classes);
  for (int i = 0; i < ds.samples.n; ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng(Rng::next_hash(seed, 0x45b1ULL));
  Assumption1Report report;
  double log_sum = 0.0;
  int d = ds.samples.c;
  for (int t = 0; t < trials; ++t) {
    int a = rng.uniform_int(ds.num_classes);
    while (by_class[a].empty()) a = rng.uniform_int(ds.num_classes);
    int b = rng.uniform_int(ds.num_classes);
    while (b == a || by_class[b].empty()) b = rng.uniform_int(ds.num_classes);
    int ia = by_class[a][rng.uniform_int(static_cast<int>(by_class[a].size()))];
    int ib = by_class[b][rng.uniform_int(static_cast<int>(by_class[b].size()))];
    Tensor x_add = Tensor::matrix(1, d);
    const float* pa = ds.samples.data() + static_cast<size_t>(ia) * d;
    const float* pb = ds.samples.data() + static_cast<size_t>(ib) * d;
    for (int i = 0; i < d; ++i) x_add.v[i] = pa[i] + pb[i];
    bool degen = false;
    double ratio = class_ratio(ds, x_add, a, b, &degen);
    if (degen) ++report.degenerate_count;
    report.ratios.push_back(ratio);
    double lr = std::log(ratio);
    log_sum += lr;
    report.max_abs_log_ratio = std::max(report.max_abs_log_ratio, std::abs(lr));
  }
  report.geometric_mean = std::exp(log_sum / trials);
  return report;
}

KernelDataset make_gaussian_classes(const std::vector<GaussianClassSpec>& specs,
                                    int dim, double gamma, uint64_t seed) {
  check(specs.size() >= 1, "make_gaussian_classes: no class specs");
  check(dim >= 1, "make_gaussian_classes: dimension must be positive");
  long total = 0;
  for (const auto& s : specs) {
    check(s.count >= 1, "make_gaussian_classes: counts must be positive");
    total += s.count;
  }
  Rng rng(Rng::next_hash(seed, 0x6a0551a5ULL));
  KernelDataset ds;
  ds.num_classes = static_cast<int>(specs.size());
  ds.samples = Tensor::matrix(static_cast<int>(total), dim);
  ds.labels.reserve(total);
  int row = 0;
  for (size_t k = 0; k < specs.size(); ++k) {
    // random direction scaled to the requested mean norm
    std::vector<double> mean(dim);
    double norm = 0.0;
    for (auto& m : mean) {
      m = rng.normal();
      norm += m * m;
    }
    norm = std::sqrt(norm);
    for (auto& m : mean) m = m / norm * specs[k].mean_norm;
    for (int i = 0; i < specs[k].count; ++i, ++row) {
      float* dst = ds.samples.data() + static_cast<size_t>(row) * dim;
      for (int j = 0; j < dim; ++j)
        dst[j] = static_cast<float>(mean[j] + specs[k].sigma * rng.normal());
      ds.labels.push_back(static_cast<int>(k));
    }
  }
  ds.gamma = gamma > 0.0 ? gamma : median_heuristic_gamma(ds);
  return ds;
}

double median_heuristic_gamma(const KernelDataset& ds, uint64_t seed) {
  check(ds.samples.n >= 2, "median_heuristic_gamma: need at least two samples");
  int n = ds.samples.n, d = ds.samples.c;
  std::vector<double> dists;
  if (n <= 512) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        dists.push_back(sq_dist(ds.samples.data() + static_cast<size_t>(i) * d,
                                ds.samples.data() + static_cast<size_t>(j) * d, d));
  } else {
    Rng rng(Rng::next_hash(seed, 0x3ed1a2ULL));
    for (int t = 0; t < 20000; ++t) {
      int i = rng.uniform_int(n), j = rng.uniform_int(n);
      while (j == i) j = rng.uniform_int(n);
      dists.push_back(sq_dist(ds.samples.data() + static_cast<size_t>(i) * d,
                              ds.samples.data() + static_cast<size_t>(j) * d, d));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  double median = dists[dists.size() / 2];
  check(median > 0.0, "median_heuristic_gamma: degenerate dataset");
  return 1.0 / (2.0 * median);
}

}  // namespace ffcba
