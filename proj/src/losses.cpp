#include "ffcba/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ffcba {

namespace {

void check_logits(const Tensor& logits, const std::vector<int>& targets) {
  check(logits.n >= 1, "output_layer_loss: empty batch");
  check(logits.c >= 2, "output_layer_loss: need at least two classes");
  check(logits.h == 1 && logits.w == 1, "output_layer_loss: logits must be (B, K)");
  check(static_cast<int>(targets.size()) == logits.n,
        "output_layer_loss: one target per row required");
  for (int t : targets)
    check(t >= 0 && t < logits.c,
          "output_layer_loss: target class " + std::to_string(t) + " out of range");
}

double image_mse(const float* a, const float* b, int count) {
  double s = 0.0;
  for (int i = 0; i < count; ++i) {
    double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s / count;
}

}  // namespace

double output_layer_loss(const Tensor& logits, const std::vector<int>& targets) {
  check_logits(logits, targets);
  int k = logits.c;
  double total = 0.0;
  for (int ni = 0; ni < logits.n; ++ni) {
    const float* row = logits.data() + static_cast<size_t>(ni) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    total += std::log(sum) - (row[targets[ni]] - mx);
  }
  return total / logits.n;
}

Tensor output_layer_loss_grad(const Tensor& logits,
                              const std::vector<int>& targets) {
  check_logits(logits, targets);
  int k = logits.c;
  Tensor g = Tensor::matrix(logits.n, k);
  for (int ni = 0; ni < logits.n; ++ni) {
    const float* row = logits.data() + static_cast<size_t>(ni) * k;
    float* grow = g.data() + static_cast<size_t>(ni) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    for (int j = 0; j < k; ++j)
      grow[j] = static_cast<float>(std::exp(row[j] - mx) / sum / logits.n);
    grow[targets[ni]] -= 1.0f / logits.n;
  }
  return g;
}

double latent_space_loss(const Tensor& latents, const Tensor& centroid) {
  check(centroid.n == 1 && centroid.c == latents.c,
        "latent_space_loss: centroid dimension mismatch");
  check(latents.n >= 1, "latent_space_loss: empty batch");
  int d = latents.c;
  double total = 0.0;
  for (int ni = 0; ni < latents.n; ++ni) {
    const float* row = latents.data() + static_cast<size_t>(ni) * d;
    for (int j = 0; j < d; ++j)
      total += std::abs(static_cast<double>(row[j]) - centroid.v[j]);
  }
  return total / (static_cast<double>(latents.n) * d);
}

Tensor latent_space_loss_grad(const Tensor& latents, const Tensor& centroid) {
  check(centroid.n == 1 && centroid.c == latents.c,
        "latent_space_loss: centroid dimension mismatch");
  int d = latents.c;
  float scale = 1.0f / (static_cast<float>(latents.n) * d);
  Tensor g = Tensor::matrix(latents.n, d);
  for (int ni = 0; ni < latents.n; ++ni) {
    const float* row = latents.data() + static_cast<size_t>(ni) * d;
    float* grow = g.data() + static_cast<size_t>(ni) * d;
    for (int j = 0; j < d; ++j) {
      float diff = row[j] - centroid.v[j];
      grow[j] = diff > 0.0f ? scale : (diff < 0.0f ? -scale : 0.0f);
    }
  }
  return g;
}

double latent_space_loss_rows(const Tensor& latents, const Tensor& centroids) {
  check(latents.same_shape(centroids),
        "latent_space_loss_rows: per-row centroid shape mismatch");
  int d = latents.c;
  double total = 0.0;
  for (size_t i = 0; i < latents.v.size(); ++i)
    total += std::abs(static_cast<double>(latents.v[i]) - centroids.v[i]);
  return total / (static_cast<double>(latents.n) * d);
}

Tensor latent_space_loss_rows_grad(const Tensor& latents,
                                   const Tensor& centroids) {
  check(latents.same_shape(centroids),
        "latent_space_loss_rows: per-row centroid shape mismatch");
  float scale = 1.0f / (static_cast<float>(latents.n) * latents.c);
  Tensor g = latents;
  for (size_t i = 0; i < g.v.size(); ++i) {
    float diff = latents.v[i] - centroids.v[i];
    g.v[i] = diff > 0.0f ? scale : (diff < 0.0f ? -scale : 0.0f);
  }
  return g;
}

double psnr(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "psnr: shape mismatch");
  check(a.numel() > 0, "psnr: empty image");
  double mse = image_mse(a.data(), b.data(), static_cast<int>(a.numel()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double visual_loss(const Tensor& base, const Tensor& mixed, double psnr_thresh) {
  check(base.same_shape(mixed), "visual_loss: shape mismatch");
  check(psnr_thresh > 0.0, "visual_loss: psnr threshold must be positive");
  check(base.n >= 1, "visual_loss: empty batch");
  int per = base.chw();
  double total = 0.0;
  for (int ni = 0; ni < base.n; ++ni) {
    double mse = image_mse(base.slice(ni), mixed.slice(ni), per);
    double p = mse == 0.0 ? kPsnrCapDb
                          : std::min(10.0 * std::log10(1.0 / mse), kPsnrCapDb);
    total += (psnr_thresh - p) / psnr_thresh;
  }
  return total / base.n;
}

Tensor visual_loss_grad_mixed(const Tensor& base, const Tensor& mixed,
                              double psnr_thresh) {
  check(base.same_shape(mixed), "visual_loss: shape mismatch");
  check(psnr_thresh > 0.0, "visual_loss: psnr threshold must be positive");
  int per = base.chw();
  Tensor g(base.n, base.c, base.h, base.w);
  constexpr double kLn10 = 2.302585092994046;
  for (int ni = 0; ni < base.n; ++ni) {
    double mse = image_mse(base.slice(ni), mixed.slice(ni), per);
    double p = mse == 0.0 ? kPsnrCapDb : 10.0 * std::log10(1.0 / mse);
    if (p >= kPsnrCapDb) continue;  // capped: zero gradient
    double coef = 20.0 / (psnr_thresh * kLn10 * mse * per * base.n);
    const float* pb = base.slice(ni);
    const float* pm = mixed.slice(ni);
    float* pg = g.slice(ni);
    for (int i = 0; i < per; ++i)
      pg[i] = static_cast<float>(coef * (static_cast<double>(pm[i]) - pb[i]));
  }
  return g;
}

double combined_loss(const LossTerms& terms, const LossWeights& w) {
  check(w.alpha >= 0.0 && w.beta >= 0.0, "combined_loss: weights must be >= 0");
  if (w.gamma.has_value()) {
    check(*w.gamma >= 0.0, "combined_loss: weights must be >= 0");
    check(terms.visual.has_value(),
          "combined_loss: gamma is active but no visual term was supplied");
  } else {
    check(!terms.visual.has_value(),
          "combined_loss: visual term supplied while the schedule omits it");
  }
  double total = w.alpha * terms.output + w.beta * terms.latent;
  if (w.gamma.has_value()) total += *w.gamma * *terms.visual;
  return total;
}

}  // namespace ffcba
