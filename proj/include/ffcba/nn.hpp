#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ffcba/rng.hpp"
#include "ffcba/tensor.hpp"

namespace ffcba::nn {

struct Param {
  Tensor value;
  Tensor grad;
  std::string name;
};

// Caffe-style explicit layers: forward caches whatever backward needs, and
// backward returns the gradient with respect to the layer input while
// accumulating parameter gradients. No autograd graph.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& gy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  virtual void collect_buffers(std::vector<Tensor*>& out) {}
  virtual std::string kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  // Frozen networks skip parameter-gradient work but still propagate input
  // gradients (the trigger trainers differentiate through the frozen proxy).
  void set_requires_grad(bool v) { requires_grad_ = v; }

 protected:
  bool requires_grad_ = true;
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string kind() const override { return "conv2d"; }
  std::unique_ptr<Layer> clone() const override;

  int in_ch() const { return in_ch_; }
  int out_ch() const { return out_ch_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  Param weight_;  // (out_ch, in_ch*k*k)
  Param bias_;    // (out_ch)
  Tensor x_cache_;
};

class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int k, int stride, int pad,
                  int output_pad, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string kind() const override { return "convtranspose2d"; }
  std::unique_ptr<Layer> clone() const override;

 private:
  int in_ch_, out_ch_, k_, stride_, pad_, output_pad_;
  Param weight_;  // (in_ch, out_ch*k*k)
  Param bias_;    // (out_ch)
  Tensor x_cache_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int k, int stride) : k_(k), stride_(stride) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "maxpool2d"; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MaxPool2d>(k_, stride_);
  }

 private:
  int k_, stride_;
  Tensor x_shape_cache_;
  std::vector<int> argmax_;
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  void collect_buffers(std::vector<Tensor*>& out) override;
  std::string kind() const override { return "batchnorm2d"; }
  std::unique_ptr<Layer> clone() const override;

 private:
  int channels_;
  float eps_ = 1e-5f, momentum_ = 0.1f;
  Param gamma_, beta_;
  Tensor running_mean_, running_var_;
  // caches for train-mode backward
  bool train_cache_ = false;
  Tensor x_cache_, xhat_cache_;
  std::vector<float> mean_cache_, invstd_cache_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "relu"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLU>(); }

 private:
  std::vector<char> mask_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "tanh"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Tanh>(); }

 private:
  Tensor y_cache_;
};

// (N, C, H, W) -> (N, C*H*W, 1, 1)
class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "flatten"; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Flatten>();
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  std::string kind() const override { return "globalavgpool"; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<GlobalAvgPool>();
  }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, Rng& rng);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& gy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string kind() const override { return "linear"; }
  std::unique_ptr<Layer> clone() const override;
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_, out_dim_;
  Param weight_;  // (out_dim, in_dim)
  Param bias_;
  Tensor x_cache_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& gy);
  std::vector<Param*> params();
  std::vector<Tensor*> buffers();
  void zero_grads();
  void set_requires_grad(bool v);
  size_t size() const { return layers_.size(); }
  Layer& layer(size_t i) { return *layers_[i]; }
  const Layer& layer(size_t i) const { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

uint64_t params_hash(std::vector<Param*> params);

}  // namespace ffcba::nn
