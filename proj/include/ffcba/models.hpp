#pragma once

#include <array>
#include <string>
#include <vector>

#include "ffcba/dataset.hpp"
#include "ffcba/nn.hpp"
#include "ffcba/tensor.hpp"

namespace ffcba {

struct TrainConfig {
  std::string optimizer = "sgd_momentum";  // sgd_momentum | adam
  float lr = 0.001f;
  float momentum = 0.9f;
  float lr_decay = 0.1f;
  int lr_decay_every = 30;
  int epochs = 30;
  int batch_size = 64;
  uint64_t seed = 1;
};

// Classifier with an explicit latent split: full_forward == head(features(x)).
class ClassifierSplit {
 public:
  static ClassifierSplit build(const std::string& arch_id, int channels,
                               int image_size, int num_classes, uint64_t seed);
  static std::vector<std::string> known_archs();

  Tensor features(const Tensor& x, bool train = false);
  Tensor head_forward(const Tensor& latent, bool train = false);
  Tensor forward(const Tensor& x, bool train = false);

  // Backward through the cached forward pass: combines a gradient arriving at
  // the logits with one arriving directly at the latent and returns the
  // gradient with respect to the input images.
  Tensor backward_to_input(const Tensor& grad_logits, const Tensor& grad_latent);

  std::vector<nn::Param*> params();
  uint64_t param_hash();
  void set_frozen(bool v);
  bool frozen() const { return frozen_; }

  int num_classes() const { return num_classes_; }
  int latent_dim() const { return latent_dim_; }
  const std::string& arch_id() const { return arch_id_; }
  int channels() const { return channels_; }
  int image_size() const { return image_size_; }
  nn::Sequential& extractor() { return extractor_; }
  nn::Sequential& head() { return head_; }

 private:
  std::string arch_id_;
  int channels_ = 0, image_size_ = 0, num_classes_ = 0, latent_dim_ = 0;
  bool frozen_ = false;
  nn::Sequential extractor_;
  nn::Sequential head_;
};

struct FeatureCentroids {
  Tensor centroids;  // (K, D)
  Tensor row(int k) const;
};

struct TrainedClassifier {
  ClassifierSplit model;
  std::vector<double> epoch_loss;
  double final_train_accuracy = 0.0;
};

TrainedClassifier train_classifier(const Dataset& ds, const std::string& arch_id,
                                   const TrainConfig& cfg);

FeatureCentroids compute_centroids(ClassifierSplit& split, const Dataset& ds);

double accuracy(ClassifierSplit& split, const Dataset& ds, int batch_size = 128);
std::vector<int> predict(ClassifierSplit& split, const Tensor& images);

// Class-conditional autoencoder emitting bounded additive triggers. The
// one-hot class vector enters as K constant planes concatenated to the image
// channels; the Tanh output is scaled by epsilon so the l-inf bound holds by
// construction. Transposed-convolution output paddings are solved per input
// resolution so the trigger shape always matches the image shape.
class TriggerGenerator {
 public:
  TriggerGenerator(int channels, int image_size, int num_classes, float epsilon,
                   uint64_t seed);

  static std::array<int, 3> solve_output_padding(int image_size);

  // Batched trigger generation; class_ids conditions each row.
  Tensor generate(const Tensor& images, const std::vector<int>& class_ids,
                  bool train);
  // Propagates dL/dT back through the net, accumulating parameter gradients.
  void backward(const Tensor& grad_trigger);

  std::vector<nn::Param*> params() { return net_.params(); }
  uint64_t param_hash() { return nn::params_hash(net_.params()); }
  nn::Sequential& net() { return net_; }

  int channels() const { return channels_; }
  int image_size() const { return image_size_; }
  int num_classes() const { return num_classes_; }
  float epsilon() const { return epsilon_; }
  const std::array<int, 3>& output_padding() const { return output_padding_; }

 private:
  int channels_, image_size_, num_classes_;
  float epsilon_;
  std::array<int, 3> output_padding_;
  nn::Sequential net_;
};

// Spec-level single-image entry point; class_vec must be exactly one-hot.
Tensor generate_trigger(TriggerGenerator& gen, const Tensor& image,
                        const std::vector<float>& class_vec);

// clamp(image + trigger, 0, 1)
Tensor apply_trigger(const Tensor& image, const Tensor& trigger);

// Versioned binary checkpoint container ("FFCK").
void save_classifier(ClassifierSplit& model, const std::string& path);
ClassifierSplit load_classifier(const std::string& path);
void save_generator(TriggerGenerator& gen, const std::string& path);
TriggerGenerator load_generator(const std::string& path);

void save_centroids(const FeatureCentroids& cents, const std::string& path);
FeatureCentroids load_centroids(const std::string& path);

}  // namespace ffcba
