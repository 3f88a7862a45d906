#include "ffcba/optim.hpp"

#include <cmath>

namespace ffcba::nn {

SgdMomentum::SgdMomentum(std::vector<Param*> params, float lr, float momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (auto* p : params_) {
    Tensor v = p->value;
    v.zero();
    velocity_.push_back(std::move(v));
  }
}

void SgdMomentum::step() {
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& val = params_[i]->value.v;
    auto& g = params_[i]->grad.v;
    auto& vel = velocity_[i].v;
    for (size_t j = 0; j < val.size(); ++j) {
      vel[j] = momentum_ * vel[j] + g[j];
      val[j] -= lr_ * vel[j];
    }
  }
}

Adam::Adam(std::vector<Param*> params, float lr, float beta1, float beta2,
           float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto* p : params_) {
    Tensor z = p->value;
    z.zero();
    m_.push_back(z);
    v_.push_back(std::move(z));
  }
}

void Adam::step() {
  ++t_;
  float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& val = params_[i]->value.v;
    auto& g = params_[i]->grad.v;
    auto& m = m_[i].v;
    auto& v = v_[i].v;
    for (size_t j = 0; j < val.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0f - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0f - beta2_) * g[j] * g[j];
      float mhat = m[j] / bc1;
      float vhat = v[j] / bc2;
      val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace ffcba::nn
