#include "ffcba/nn.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ffcba::nn {

namespace {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

int conv_out(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// cols has (C*k*k) rows and (oh*ow) columns, row-major.
void im2col(const float* src, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, float* cols) {
  int ohw = oh * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        float* dst = cols + (static_cast<size_t>(ci) * k * k + ki * k + kj) * ohw;
        for (int i = 0; i < oh; ++i) {
          int hi = i * stride - pad + ki;
          if (hi < 0 || hi >= h) {
            for (int j = 0; j < ow; ++j) dst[i * ow + j] = 0.0f;
            continue;
          }
          const float* row = src + (static_cast<size_t>(ci) * h + hi) * w;
          for (int j = 0; j < ow; ++j) {
            int wi = j * stride - pad + kj;
            dst[i * ow + j] = (wi >= 0 && wi < w) ? row[wi] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col; dst must be zeroed by the caller.
void col2im(const float* cols, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, float* dst) {
  int ohw = oh * ow;
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const float* src =
            cols + (static_cast<size_t>(ci) * k * k + ki * k + kj) * ohw;
        for (int i = 0; i < oh; ++i) {
          int hi = i * stride - pad + ki;
          if (hi < 0 || hi >= h) continue;
          float* row = dst + (static_cast<size_t>(ci) * h + hi) * w;
          for (int j = 0; j < ow; ++j) {
            int wi = j * stride - pad + kj;
            if (wi >= 0 && wi < w) row[wi] += src[i * ow + j];
          }
        }
      }
    }
  }
}

void init_uniform(Tensor& t, float bound, Rng& rng) {
  for (auto& f : t.v) f = rng.uniformf(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad) {
  weight_.value = Tensor::matrix(out_ch, in_ch * k * k);
  weight_.grad = Tensor::matrix(out_ch, in_ch * k * k);
  weight_.name = "conv_w";
  bias_.value = Tensor::matrix(1, out_ch);
  bias_.grad = Tensor::matrix(1, out_ch);
  bias_.name = "conv_b";
  float bound = 1.0f / std::sqrt(static_cast<float>(in_ch * k * k));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
  check(x.c == in_ch_, "conv2d: input channel mismatch");
  int oh = conv_out(x.h, k_, stride_, pad_);
  int ow = conv_out(x.w, k_, stride_, pad_);
  check(oh > 0 && ow > 0, "conv2d: input spatially too small");
  x_cache_ = x;
  Tensor y(x.n, out_ch_, oh, ow);
  int ckk = in_ch_ * k_ * k_, ohw = oh * ow;
  FloatVec cols(static_cast<size_t>(ckk) * ohw);
  ConstMapMat wm(weight_.value.data(), out_ch_, ckk);
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(x.slice(ni), in_ch_, x.h, x.w, k_, stride_, pad_, oh, ow, cols.data());
    MapMat ym(y.slice(ni), out_ch_, ohw);
    ConstMapMat cm(cols.data(), ckk, ohw);
    ym.noalias() = wm * cm;
    for (int co = 0; co < out_ch_; ++co)
      ym.row(co).array() += bias_.value.v[co];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const Tensor& x = x_cache_;
  int oh = gy.h, ow = gy.w, ohw = oh * ow, ckk = in_ch_ * k_ * k_;
  Tensor gx(x.n, x.c, x.h, x.w);
  FloatVec cols(static_cast<size_t>(ckk) * ohw);
  FloatVec gcols(static_cast<size_t>(ckk) * ohw);
  ConstMapMat wm(weight_.value.data(), out_ch_, ckk);
  MapMat gwm(weight_.grad.data(), out_ch_, ckk);
  for (int ni = 0; ni < x.n; ++ni) {
    ConstMapMat gym(gy.slice(ni), out_ch_, ohw);
    if (requires_grad_) {
      im2col(x.slice(ni), in_ch_, x.h, x.w, k_, stride_, pad_, oh, ow,
             cols.data());
      ConstMapMat cm(cols.data(), ckk, ohw);
      gwm.noalias() += gym * cm.transpose();
      const float* gyp = gy.slice(ni);
      for (int co = 0; co < out_ch_; ++co) {
        double s = 0.0;
        for (int i = 0; i < ohw; ++i) s += gyp[static_cast<size_t>(co) * ohw + i];
        bias_.grad.v[co] += static_cast<float>(s);
      }
    }
    MapMat gcm(gcols.data(), ckk, ohw);
    gcm.noalias() = wm.transpose() * gym;
    col2im(gcols.data(), in_ch_, x.h, x.w, k_, stride_, pad_, oh, ow,
           gx.slice(ni));
  }
  return gx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::unique_ptr<Layer> Conv2d::clone() const {
  return std::unique_ptr<Layer>(new Conv2d(*this));
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int k, int stride,
                                 int pad, int output_pad, Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
      output_pad_(output_pad) {
  check(output_pad_ >= 0 && output_pad_ < stride_,
        "convtranspose2d: output padding must lie in [0, stride)");
  weight_.value = Tensor::matrix(in_ch, out_ch * k * k);
  weight_.grad = Tensor::matrix(in_ch, out_ch * k * k);
  weight_.name = "convt_w";
  bias_.value = Tensor::matrix(1, out_ch);
  bias_.grad = Tensor::matrix(1, out_ch);
  bias_.name = "convt_b";
  float bound = 1.0f / std::sqrt(static_cast<float>(out_ch * k * k));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool) {
  check(x.c == in_ch_, "convtranspose2d: input channel mismatch");
  int oh = (x.h - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
  int ow = (x.w - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
  check(oh > 0 && ow > 0, "convtranspose2d: invalid output size");
  x_cache_ = x;
  Tensor y(x.n, out_ch_, oh, ow);
  int ckk = out_ch_ * k_ * k_, ihw = x.h * x.w;
  FloatVec cols(static_cast<size_t>(ckk) * ihw);
  ConstMapMat wm(weight_.value.data(), in_ch_, ckk);
  for (int ni = 0; ni < x.n; ++ni) {
    ConstMapMat xm(x.slice(ni), in_ch_, ihw);
    MapMat cm(cols.data(), ckk, ihw);
    cm.noalias() = wm.transpose() * xm;
    col2im(cols.data(), out_ch_, oh, ow, k_, stride_, pad_, x.h, x.w,
           y.slice(ni));
    MapMat ym(y.slice(ni), out_ch_, oh * ow);
    for (int co = 0; co < out_ch_; ++co)
      ym.row(co).array() += bias_.value.v[co];
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
  const Tensor& x = x_cache_;
  int ckk = out_ch_ * k_ * k_, ihw = x.h * x.w;
  Tensor gx(x.n, x.c, x.h, x.w);
  FloatVec gcols(static_cast<size_t>(ckk) * ihw);
  ConstMapMat wm(weight_.value.data(), in_ch_, ckk);
  MapMat gwm(weight_.grad.data(), in_ch_, ckk);
  for (int ni = 0; ni < x.n; ++ni) {
    im2col(gy.slice(ni), out_ch_, gy.h, gy.w, k_, stride_, pad_, x.h, x.w,
           gcols.data());
    ConstMapMat gcm(gcols.data(), ckk, ihw);
    MapMat gxm(gx.slice(ni), in_ch_, ihw);
    gxm.noalias() = wm * gcm;
    if (requires_grad_) {
      ConstMapMat xm(x.slice(ni), in_ch_, ihw);
      gwm.noalias() += xm * gcm.transpose();
      const float* gyp = gy.slice(ni);
      int plane = gy.h * gy.w;
      for (int co = 0; co < out_ch_; ++co) {
        double s = 0.0;
        for (int i = 0; i < plane; ++i) s += gyp[static_cast<size_t>(co) * plane + i];
        bias_.grad.v[co] += static_cast<float>(s);
      }
    }
  }
  return gx;
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::unique_ptr<Layer> ConvTranspose2d::clone() const {
  return std::unique_ptr<Layer>(new ConvTranspose2d(*this));
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  int oh = (x.h - k_) / stride_ + 1;
  int ow = (x.w - k_) / stride_ + 1;
  check(oh > 0 && ow > 0, "maxpool2d: input spatially too small");
  x_shape_cache_ = Tensor(x.n, x.c, x.h, x.w);
  Tensor y(x.n, x.c, oh, ow);
  argmax_.assign(y.numel(), 0);
  size_t oidx = 0;
  for (int ni = 0; ni < x.n; ++ni) {
    for (int ci = 0; ci < x.c; ++ci) {
      const float* plane = x.data() + ((static_cast<size_t>(ni) * x.c) + ci) * x.h * x.w;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j, ++oidx) {
          int h0 = i * stride_, w0 = j * stride_;
          float best = plane[h0 * x.w + w0];
          int besti = h0 * x.w + w0;
          for (int ki = 0; ki < k_; ++ki)
            for (int kj = 0; kj < k_; ++kj) {
              int idx = (h0 + ki) * x.w + (w0 + kj);
              if (plane[idx] > best) {
                best = plane[idx];
                besti = idx;
              }
            }
          y.v[oidx] = best;
          argmax_[oidx] = besti;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) {
  const Tensor& xs = x_shape_cache_;
  Tensor gx(xs.n, xs.c, xs.h, xs.w);
  size_t oidx = 0;
  int plane = xs.h * xs.w;
  for (int ni = 0; ni < gy.n; ++ni)
    for (int ci = 0; ci < gy.c; ++ci) {
      float* gplane = gx.data() + ((static_cast<size_t>(ni) * xs.c) + ci) * plane;
      for (int p = 0; p < gy.h * gy.w; ++p, ++oidx)
        gplane[argmax_[oidx]] += gy.v[oidx];
    }
  return gx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels) : channels_(channels) {
  gamma_.value = Tensor::matrix(1, channels);
  gamma_.grad = Tensor::matrix(1, channels);
  gamma_.name = "bn_gamma";
  beta_.value = Tensor::matrix(1, channels);
  beta_.grad = Tensor::matrix(1, channels);
  beta_.name = "bn_beta";
  std::fill(gamma_.value.v.begin(), gamma_.value.v.end(), 1.0f);
  running_mean_ = Tensor::matrix(1, channels);
  running_var_ = Tensor::matrix(1, channels);
  std::fill(running_var_.v.begin(), running_var_.v.end(), 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  check(x.c == channels_, "batchnorm2d: channel mismatch");
  Tensor y(x.n, x.c, x.h, x.w);
  int plane = x.h * x.w;
  train_cache_ = train;
  if (train) {
    x_cache_ = x;
    xhat_cache_ = Tensor(x.n, x.c, x.h, x.w);
    mean_cache_.assign(channels_, 0.0f);
    invstd_cache_.assign(channels_, 0.0f);
    double m = static_cast<double>(x.n) * plane;
    for (int ci = 0; ci < channels_; ++ci) {
      double sum = 0.0, sq = 0.0;
      for (int ni = 0; ni < x.n; ++ni) {
        const float* p = x.slice(ni) + static_cast<size_t>(ci) * plane;
        for (int i = 0; i < plane; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      double mean = sum / m;
      double var = sq / m - mean * mean;
      if (var < 0.0) var = 0.0;
      float invstd = static_cast<float>(1.0 / std::sqrt(var + eps_));
      mean_cache_[ci] = static_cast<float>(mean);
      invstd_cache_[ci] = invstd;
      float g = gamma_.value.v[ci], b = beta_.value.v[ci];
      for (int ni = 0; ni < x.n; ++ni) {
        const float* p = x.slice(ni) + static_cast<size_t>(ci) * plane;
        float* ph = xhat_cache_.slice(ni) + static_cast<size_t>(ci) * plane;
        float* py = y.slice(ni) + static_cast<size_t>(ci) * plane;
        for (int i = 0; i < plane; ++i) {
          ph[i] = (p[i] - static_cast<float>(mean)) * invstd;
          py[i] = g * ph[i] + b;
        }
      }
      double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
      running_mean_.v[ci] =
          (1.0f - momentum_) * running_mean_.v[ci] + momentum_ * static_cast<float>(mean);
      running_var_.v[ci] =
          (1.0f - momentum_) * running_var_.v[ci] + momentum_ * static_cast<float>(unbiased);
    }
  } else {
    for (int ci = 0; ci < channels_; ++ci) {
      float invstd = 1.0f / std::sqrt(running_var_.v[ci] + eps_);
      float g = gamma_.value.v[ci], b = beta_.value.v[ci];
      float mean = running_mean_.v[ci];
      for (int ni = 0; ni < x.n; ++ni) {
        const float* p = x.slice(ni) + static_cast<size_t>(ci) * plane;
        float* py = y.slice(ni) + static_cast<size_t>(ci) * plane;
        for (int i = 0; i < plane; ++i) py[i] = g * (p[i] - mean) * invstd + b;
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
  int plane = gy.h * gy.w;
  Tensor gx(gy.n, gy.c, gy.h, gy.w);
  if (!train_cache_) {
    // eval mode: normalization is a fixed affine map
    for (int ci = 0; ci < channels_; ++ci) {
      float scale = gamma_.value.v[ci] / std::sqrt(running_var_.v[ci] + eps_);
      for (int ni = 0; ni < gy.n; ++ni) {
        const float* pg = gy.slice(ni) + static_cast<size_t>(ci) * plane;
        float* px = gx.slice(ni) + static_cast<size_t>(ci) * plane;
        for (int i = 0; i < plane; ++i) px[i] = pg[i] * scale;
      }
    }
    return gx;
  }
  double m = static_cast<double>(gy.n) * plane;
  for (int ci = 0; ci < channels_; ++ci) {
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int ni = 0; ni < gy.n; ++ni) {
      const float* pg = gy.slice(ni) + static_cast<size_t>(ci) * plane;
      const float* ph = xhat_cache_.slice(ni) + static_cast<size_t>(ci) * plane;
      for (int i = 0; i < plane; ++i) {
        sum_gy += pg[i];
        sum_gy_xhat += static_cast<double>(pg[i]) * ph[i];
      }
    }
    if (requires_grad_) {
      gamma_.grad.v[ci] += static_cast<float>(sum_gy_xhat);
      beta_.grad.v[ci] += static_cast<float>(sum_gy);
    }
    float g = gamma_.value.v[ci], invstd = invstd_cache_[ci];
    float c1 = static_cast<float>(sum_gy / m), c2 = static_cast<float>(sum_gy_xhat / m);
    for (int ni = 0; ni < gy.n; ++ni) {
      const float* pg = gy.slice(ni) + static_cast<size_t>(ci) * plane;
      const float* ph = xhat_cache_.slice(ni) + static_cast<size_t>(ci) * plane;
      float* px = gx.slice(ni) + static_cast<size_t>(ci) * plane;
      for (int i = 0; i < plane; ++i)
        px[i] = g * invstd * (pg[i] - c1 - ph[i] * c2);
    }
  }
  return gx;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm2d::collect_buffers(std::vector<Tensor*>& out) {
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

std::unique_ptr<Layer> BatchNorm2d::clone() const {
  return std::unique_ptr<Layer>(new BatchNorm2d(*this));
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x, bool) {
  Tensor y = x;
  mask_.assign(x.numel(), 0);
  for (size_t i = 0; i < y.v.size(); ++i) {
    if (y.v[i] > 0.0f) {
      mask_[i] = 1;
    } else {
      y.v[i] = 0.0f;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  Tensor gx = gy;
  for (size_t i = 0; i < gx.v.size(); ++i)
    if (!mask_[i]) gx.v[i] = 0.0f;
  return gx;
}

Tensor Tanh::forward(const Tensor& x, bool) {
  Tensor y = x;
  for (auto& f : y.v) f = std::tanh(f);
  y_cache_ = y;
  return y;
}

Tensor Tanh::backward(const Tensor& gy) {
  Tensor gx = gy;
  for (size_t i = 0; i < gx.v.size(); ++i)
    gx.v[i] *= 1.0f - y_cache_.v[i] * y_cache_.v[i];
  return gx;
}

Tensor Flatten::forward(const Tensor& x, bool) {
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Tensor y = x;
  y.c = x.chw();
  y.h = 1;
  y.w = 1;
  return y;
}

Tensor Flatten::backward(const Tensor& gy) {
  Tensor gx = gy;
  gx.c = c_;
  gx.h = h_;
  gx.w = w_;
  return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Tensor y(x.n, x.c, 1, 1);
  int plane = x.h * x.w;
  for (int ni = 0; ni < x.n; ++ni)
    for (int ci = 0; ci < x.c; ++ci) {
      const float* p = x.slice(ni) + static_cast<size_t>(ci) * plane;
      double s = 0.0;
      for (int i = 0; i < plane; ++i) s += p[i];
      y.at(ni, ci, 0, 0) = static_cast<float>(s / plane);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
  Tensor gx(gy.n, c_, h_, w_);
  int plane = h_ * w_;
  float inv = 1.0f / plane;
  for (int ni = 0; ni < gy.n; ++ni)
    for (int ci = 0; ci < c_; ++ci) {
      float g = gy.at(ni, ci, 0, 0) * inv;
      float* p = gx.slice(ni) + static_cast<size_t>(ci) * plane;
      for (int i = 0; i < plane; ++i) p[i] = g;
    }
  return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_dim, int out_dim, Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
  weight_.value = Tensor::matrix(out_dim, in_dim);
  weight_.grad = Tensor::matrix(out_dim, in_dim);
  weight_.name = "linear_w";
  bias_.value = Tensor::matrix(1, out_dim);
  bias_.grad = Tensor::matrix(1, out_dim);
  bias_.name = "linear_b";
  float bound = 1.0f / std::sqrt(static_cast<float>(in_dim));
  init_uniform(weight_.value, bound, rng);
  init_uniform(bias_.value, bound, rng);
}

Tensor Linear::forward(const Tensor& x, bool) {
  check(x.chw() == in_dim_, "linear: input dimension mismatch");
  x_cache_ = x;
  Tensor y = Tensor::matrix(x.n, out_dim_);
  ConstMapMat xm(x.data(), x.n, in_dim_);
  ConstMapMat wm(weight_.value.data(), out_dim_, in_dim_);
  MapMat ym(y.data(), x.n, out_dim_);
  ym.noalias() = xm * wm.transpose();
  for (int ni = 0; ni < x.n; ++ni)
    for (int o = 0; o < out_dim_; ++o) ym(ni, o) += bias_.value.v[o];
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  const Tensor& x = x_cache_;
  Tensor gx(x.n, x.c, x.h, x.w);
  ConstMapMat gym(gy.data(), gy.n, out_dim_);
  ConstMapMat xm(x.data(), x.n, in_dim_);
  ConstMapMat wm(weight_.value.data(), out_dim_, in_dim_);
  MapMat gxm(gx.data(), x.n, in_dim_);
  gxm.noalias() = gym * wm;
  if (requires_grad_) {
    MapMat gwm(weight_.grad.data(), out_dim_, in_dim_);
    gwm.noalias() += gym.transpose() * xm;
    for (int o = 0; o < out_dim_; ++o) {
      double s = 0.0;
      for (int ni = 0; ni < gy.n; ++ni)
        s += gy.v[static_cast<size_t>(ni) * out_dim_ + o];
      bias_.grad.v[o] += static_cast<float>(s);
    }
  }
  return gx;
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

std::unique_ptr<Layer> Linear::clone() const {
  return std::unique_ptr<Layer>(new Linear(*this));
}

// ------------------------------------------------------------ Sequential

Sequential::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this == &other) return *this;
  layers_.clear();
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
  return *this;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& gy) {
  Tensor cur = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

std::vector<Param*> Sequential::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

std::vector<Tensor*> Sequential::buffers() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) l->collect_buffers(out);
  return out;
}

void Sequential::zero_grads() {
  for (auto* p : params()) p->grad.zero();
}

void Sequential::set_requires_grad(bool v) {
  for (auto& l : layers_) l->set_requires_grad(v);
}

uint64_t params_hash(std::vector<Param*> params) {
  uint64_t h = 1469598103934665603ULL;
  for (auto* p : params) h = bytes_hash(p->value, h);
  return h;
}

}  // namespace ffcba::nn
