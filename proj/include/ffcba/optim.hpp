#pragma once

#include <vector>

#include "ffcba/nn.hpp"

namespace ffcba::nn {

// Momentum SGD with optional step decay handled by the caller via set_lr.
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Param*> params, float lr, float momentum);
  void step();
  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> velocity_;
  float lr_, momentum_;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f,
       float beta2 = 0.999f, float eps = 1e-8f);
  void step();
  void set_lr(float lr) { lr_ = lr; }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace ffcba::nn
