#pragma once

#include <optional>
#include <vector>

#include "ffcba/tensor.hpp"

namespace ffcba {

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.3;
  // Empty gamma means the visual term is omitted from the objective (the
  // in-class fine-tuning stage), which is distinct from gamma == 0 in the
  // run manifest even though the numbers agree.
  std::optional<double> gamma = 0.5;
};

struct LossTerms {
  double output = 0.0;
  double latent = 0.0;
  std::optional<double> visual;
};

// Mean cross-entropy between softmax(logits) and the target classes.
double output_layer_loss(const Tensor& logits, const std::vector<int>& targets);
Tensor output_layer_loss_grad(const Tensor& logits,
                              const std::vector<int>& targets);

// Mean absolute difference between each latent row and a single centroid.
double latent_space_loss(const Tensor& latents, const Tensor& centroid);
Tensor latent_space_loss_grad(const Tensor& latents, const Tensor& centroid);

// Trainer variant: row i is compared against centroids row i.
double latent_space_loss_rows(const Tensor& latents, const Tensor& centroids);
Tensor latent_space_loss_rows_grad(const Tensor& latents,
                                   const Tensor& centroids);

// 10*log10(1 / MSE) on [0,1] pixels (peak 1); +inf for identical images.
double psnr(const Tensor& a, const Tensor& b);

// Identical pairs contribute the capped minimum (thresh - cap)/thresh so the
// term stays finite and differentiable; cap is 100 dB.
inline constexpr double kPsnrCapDb = 100.0;

// Mean over the batch of (thresh - PSNR(base_i, mixed_i)) / thresh. Negative
// values (PSNR above the threshold) are returned as-is.
double visual_loss(const Tensor& base, const Tensor& mixed, double psnr_thresh);
Tensor visual_loss_grad_mixed(const Tensor& base, const Tensor& mixed,
                              double psnr_thresh);

double combined_loss(const LossTerms& terms, const LossWeights& w);

}  // namespace ffcba
