#include "ffcba/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace ffcba {

namespace {

double softmax_entropy(const float* logits, int k) {
  double mx = logits[0];
  for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(logits[j]));
  double sum = 0.0;
  for (int j = 0; j < k; ++j) sum += std::exp(logits[j] - mx);
  double h = 0.0;
  for (int j = 0; j < k; ++j) {
    double p = std::exp(logits[j] - mx) / sum;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

}  // namespace

double strip_entropy(ClassifierSplit& model, const Tensor& input,
                     const Dataset& overlay_pool, int n, double blend, Rng& rng) {
  check(n >= 1, "strip_entropy: overlay count must be >= 1");
  check(blend > 0.0 && blend < 1.0, "strip_entropy: blend must lie in (0,1)");
  check(overlay_pool.size() > 0, "strip_entropy: empty overlay pool");
  check(input.n == 1, "strip_entropy: expected a single input");
  check(input.c == overlay_pool.channels && input.h == overlay_pool.height &&
            input.w == overlay_pool.width,
        "strip_entropy: overlay pool shape mismatch");

  Tensor batch(n, input.c, input.h, input.w);
  for (int i = 0; i < n; ++i) {
    int pick = rng.uniform_int(overlay_pool.size());
    const float* ov =
        overlay_pool.images.data() + static_cast<size_t>(pick) * overlay_pool.image_numel();
    float* dst = batch.slice(i);
    for (size_t p = 0; p < input.numel(); ++p)
      dst[p] = static_cast<float>(blend * input.v[p] + (1.0 - blend) * ov[p]);
  }
  Tensor logits = model.forward(batch, false);
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    total += softmax_entropy(logits.data() + static_cast<size_t>(i) * logits.c,
                             logits.c);
  return total / n;
}

StripResult strip_compare(ClassifierSplit& model, const Dataset& clean_set,
                          const Dataset& poisoned_set, const Dataset& overlay_pool,
                          const StripParams& params) {
  check(clean_set.size() > 0 && poisoned_set.size() > 0,
        "strip_compare: both sets must be non-empty");
  StripResult result;
  result.clean.population = "clean";
  result.poisoned.population = "poisoned";
  Rng base(Rng::next_hash(params.seed, 0x57a1bULL));

  auto run = [&](const Dataset& set, EntropyDistribution& dist) {
    dist.entropies.resize(set.size());
    for (int i = 0; i < set.size(); ++i) {
      Rng rng = Rng(Rng::next_hash(params.seed, 0x57a1bULL + i));
      dist.entropies[i] = strip_entropy(model, set.image(i), overlay_pool,
                                        params.overlays, params.blend, rng);
    }
  };
  (void)base;
  run(clean_set, result.clean);
  run(poisoned_set, result.poisoned);

  result.ks = two_sample_ks(result.clean.entropies, result.poisoned.entropies);

  auto degenerate = [](const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
  };
  result.degenerate =
      degenerate(result.clean.entropies) || degenerate(result.poisoned.entropies);

  // threshold at the clean distribution's 1st percentile (nearest rank)
  std::vector<double> sorted = result.clean.entropies;
  std::sort(sorted.begin(), sorted.end());
  size_t rank = static_cast<size_t>(
      std::ceil(0.01 * static_cast<double>(sorted.size())));
  rank = std::max<size_t>(1, std::min(rank, sorted.size()));
  double threshold = sorted[rank - 1];
  long flagged = 0;
  for (double e : result.poisoned.entropies)
    if (e < threshold) ++flagged;
  result.detection_rate_at_1pct_frr =
      static_cast<double>(flagged) / poisoned_set.size();
  return result;
}

std::vector<int> entropy_histogram(const std::vector<double>& entropies,
                                   int num_classes) {
  check(num_classes >= 2, "entropy_histogram: need at least two classes");
  const int bins = 50;
  double upper = std::log(static_cast<double>(num_classes));
  std::vector<int> hist(bins, 0);
  for (double e : entropies) {
    int b = static_cast<int>(e / upper * bins);
    b = std::max(0, std::min(bins - 1, b));
    ++hist[b];
  }
  return hist;
}

int last_conv_index(ClassifierSplit& model) {
  int last = -1;
  for (size_t i = 0; i < model.extractor().size(); ++i)
    if (model.extractor().layer(i).kind() == "conv2d") last = static_cast<int>(i);
  check(last >= 0, "fine_prune: model has no convolutional layer");
  return last;
}

std::vector<PrunePoint> fine_prune(ClassifierSplit& model,
                                   const Dataset& clean_subset, int layer_index,
                                   const std::vector<double>& fractions,
                                   const PruneEval& eval) {
  check(clean_subset.size() > 0, "fine_prune: empty clean subset");
  check(!fractions.empty() && fractions.front() == 0.0,
        "fine_prune: fractions must start at 0");
  for (size_t i = 0; i < fractions.size(); ++i) {
    check(fractions[i] <= 1.0, "fine_prune: fraction > 1 rejected");
    if (i > 0)
      check(fractions[i] > fractions[i - 1],
            "fine_prune: fractions must be strictly ascending");
  }
  check(layer_index == last_conv_index(model),
        "fine_prune: prune target must be the last convolutional feature layer");

  ClassifierSplit pruned = model;  // deep copy; the input model stays intact
  auto* conv = dynamic_cast<nn::Conv2d*>(&pruned.extractor().layer(layer_index));
  check(conv != nullptr, "fine_prune: target layer is not a convolution");
  int channels = conv->out_ch();

  // rank channels by mean absolute activation of the target layer's output
  std::vector<double> activation(channels, 0.0);
  const int bs = 64;
  long seen = 0;
  for (int start = 0; start < clean_subset.size(); start += bs) {
    int end = std::min(clean_subset.size(), start + bs);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor cur = clean_subset.gather(idx);
    for (int li = 0; li <= layer_index; ++li)
      cur = pruned.extractor().layer(li).forward(cur, false);
    int plane = cur.h * cur.w;
    for (int ni = 0; ni < cur.n; ++ni)
      for (int ci = 0; ci < channels; ++ci) {
        const float* p = cur.slice(ni) + static_cast<size_t>(ci) * plane;
        double s = 0.0;
        for (int i = 0; i < plane; ++i) s += std::abs(p[i]);
        activation[ci] += s / plane;
      }
    seen += end - start;
  }
  for (auto& a : activation) a /= seen;

  std::vector<int> order(channels);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return activation[a] < activation[b]; });

  pruned.set_frozen(true);
  std::vector<PrunePoint> curve;
  int already = 0;
  int in_per_ch = conv->weight().value.c;  // (out_ch, in*k*k)
  for (double f : fractions) {
    int target = static_cast<int>(std::floor(f * channels));
    for (; already < target; ++already) {
      int ch = order[already];
      float* wrow = conv->weight().value.data() + static_cast<size_t>(ch) * in_per_ch;
      std::fill(wrow, wrow + in_per_ch, 0.0f);
      conv->bias().value.v[ch] = 0.0f;
    }
    auto [ba, asr] = eval(pruned);
    curve.push_back({f, ba, asr});
  }
  return curve;
}

}  // namespace ffcba
