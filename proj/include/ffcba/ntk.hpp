#pragma once

#include <cstdint>
#include <vector>

#include "ffcba/tensor.hpp"

namespace ffcba {

// Kernel-regression stand-in for a trained model: psi(x) is the kernel-
// weighted average of one-hot labels with K(x, x') = exp(-2*gamma*||x-x'||^2).
// All kernel sums are accumulated in the log domain; image-scale norms
// underflow double precision otherwise.
struct KernelDataset {
  Tensor samples;  // (N, D)
  std::vector<int> labels;
  int num_classes = 0;
  double gamma = 1.0;

  std::vector<long> class_counts() const;
};

// Class-probability vector; components are positive and sum to 1.
std::vector<double> ntk_predict(const KernelDataset& ds, const Tensor& x);

// Ratio of class-a to class-b kernel mass at x. Strictly positive by
// construction; *degenerate is set when either mass is below 1e-300.
double class_ratio(const KernelDataset& ds, const Tensor& x, int a, int b,
                   bool* degenerate = nullptr);

struct Assumption1Report {
  std::vector<double> ratios;  // one per sampled cross-class pair
  double geometric_mean = 0.0;
  double max_abs_log_ratio = 0.0;
  long degenerate_count = 0;
};

// Samples cross-class pairs (x_a, x_b), forms x_add = x_a + x_b and measures
// the class-a to class-b ratio at x_add.
Assumption1Report verify_assumption1(const KernelDataset& ds, int trials,
                                     uint64_t seed);

struct GaussianClassSpec {
  int count = 100;
  double mean_norm = 1.0;
  double sigma = 0.3;
};

// Isotropic Gaussian classes with controllable means, norms and counts, for
// switching the uniform-distribution precondition on and off.
KernelDataset make_gaussian_classes(const std::vector<GaussianClassSpec>& specs,
                                    int dim, double gamma, uint64_t seed);

// Median heuristic: 1 / (2 * median pairwise squared distance).
double median_heuristic_gamma(const KernelDataset& ds, uint64_t seed = 1);

}  // namespace ffcba
