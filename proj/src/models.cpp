#include "ffcba/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ffcba/losses.hpp"
#include "ffcba/optim.hpp"
#include "ffcba/rng.hpp"

namespace ffcba {

using nlohmann::json;

// ------------------------------------------------------- ClassifierSplit

ClassifierSplit ClassifierSplit::build(const std::string& arch_id, int channels,
                                       int image_size, int num_classes,
                                       uint64_t seed) {
  check(num_classes >= 2, "classifier: need at least two classes");
  check(channels >= 1 && image_size >= 8, "classifier: input too small");
  ClassifierSplit m;
  m.arch_id_ = arch_id;
  m.channels_ = channels;
  m.image_size_ = image_size;
  m.num_classes_ = num_classes;
  Rng rng(Rng::next_hash(seed, 0xc1a551f1e5ULL));
  using namespace nn;
  auto flat_dim = [&](Sequential& net) {
    Tensor dummy(1, channels, image_size, image_size);
    return static_cast<int>(net.forward(dummy, false).numel());
  };
  if (arch_id == "cnn_a") {
    auto& e = m.extractor_;
    e.add(std::make_unique<Conv2d>(channels, 16, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Conv2d>(16, 32, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Conv2d>(32, 64, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Flatten>());
    int d = flat_dim(e);
    e.add(std::make_unique<Linear>(d, 128, rng));
    e.add(std::make_unique<ReLU>());
    m.latent_dim_ = 128;
  } else if (arch_id == "cnn_b") {
    auto& e = m.extractor_;
    e.add(std::make_unique<Conv2d>(channels, 12, 5, 1, 2, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Conv2d>(12, 24, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<Conv2d>(24, 24, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Conv2d>(24, 48, 3, 1, 1, rng));
    e.add(std::make_unique<ReLU>());
    e.add(std::make_unique<MaxPool2d>(2, 2));
    e.add(std::make_unique<Flatten>());
    int d = flat_dim(e);
    e.add(std::make_unique<Linear>(d, 96, rng));
    e.add(std::make_unique<ReLU>());
    m.latent_dim_ = 96;
  } else if (arch_id == "mlp_tiny") {
    auto& e = m.extractor_;
    e.add(std::make_unique<Flatten>());
    e.add(std::make_unique<Linear>(channels * image_size * image_size, 32, rng));
    e.add(std::make_unique<ReLU>());
    m.latent_dim_ = 32;
  } else {
    throw ValidationError("unknown classifier architecture: " + arch_id);
  }
  m.head_.add(std::make_unique<nn::Linear>(m.latent_dim_, num_classes, rng));
  return m;
}

std::vector<std::string> ClassifierSplit::known_archs() {
  return {"cnn_a", "cnn_b", "mlp_tiny"};
}

Tensor ClassifierSplit::features(const Tensor& x, bool train) {
  check(x.c == channels_ && x.h == image_size_ && x.w == image_size_,
        "classifier: input shape mismatch");
  return extractor_.forward(x, train);
}

Tensor ClassifierSplit::head_forward(const Tensor& latent, bool train) {
  return head_.forward(latent, train);
}

Tensor ClassifierSplit::forward(const Tensor& x, bool train) {
  return head_forward(features(x, train), train);
}

Tensor ClassifierSplit::backward_to_input(const Tensor& grad_logits,
                                          const Tensor& grad_latent) {
  Tensor gz = head_.backward(grad_logits);
  if (grad_latent.numel() > 0) {
    check(gz.same_shape(grad_latent), "backward_to_input: latent grad shape mismatch");
    for (size_t i = 0; i < gz.v.size(); ++i) gz.v[i] += grad_latent.v[i];
  }
  return extractor_.backward(gz);
}

std::vector<nn::Param*> ClassifierSplit::params() {
  auto p = extractor_.params();
  auto h = head_.params();
  p.insert(p.end(), h.begin(), h.end());
  return p;
}

uint64_t ClassifierSplit::param_hash() { return nn::params_hash(params()); }

void ClassifierSplit::set_frozen(bool v) {
  frozen_ = v;
  extractor_.set_requires_grad(!v);
  head_.set_requires_grad(!v);
}

Tensor FeatureCentroids::row(int k) const {
  check(k >= 0 && k < centroids.n, "centroids: class index out of range");
  Tensor r = Tensor::matrix(1, centroids.c);
  std::memcpy(r.data(), centroids.data() + static_cast<size_t>(k) * centroids.c,
              static_cast<size_t>(centroids.c) * sizeof(float));
  return r;
}

// ---------------------------------------------------------------- training

TrainedClassifier train_classifier(const Dataset& ds, const std::string& arch_id,
                                   const TrainConfig& cfg) {
  check(ds.size() > 0, "train_classifier: empty dataset");
  check(ds.height == ds.width, "train_classifier: images must be square");
  for (int l : ds.labels)
    check(l >= 0 && l < ds.num_classes,
          "train_classifier: label out of range: " + std::to_string(l));
  check(cfg.lr > 0.0f, "train_classifier: learning rate must be positive");
  check(cfg.epochs >= 0, "train_classifier: epochs must be >= 0");
  check(cfg.batch_size >= 1, "train_classifier: batch size must be >= 1");
  check(cfg.optimizer == "sgd_momentum" || cfg.optimizer == "adam",
        "train_classifier: unknown optimizer " + cfg.optimizer);

  TrainedClassifier out{ClassifierSplit::build(arch_id, ds.channels, ds.height,
                                               ds.num_classes, cfg.seed),
                        {},
                        0.0};
  ClassifierSplit& model = out.model;

  std::unique_ptr<nn::SgdMomentum> sgd;
  std::unique_ptr<nn::Adam> adam;
  if (cfg.optimizer == "sgd_momentum")
    sgd = std::make_unique<nn::SgdMomentum>(model.params(), cfg.lr, cfg.momentum);
  else
    adam = std::make_unique<nn::Adam>(model.params(), cfg.lr);

  Rng rng(Rng::next_hash(cfg.seed, 0x7a11b3ULL));
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    float lr = cfg.lr * std::pow(cfg.lr_decay, epoch / std::max(1, cfg.lr_decay_every));
    if (sgd) sgd->set_lr(lr);
    if (adam) adam->set_lr(lr);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < ds.size(); start += cfg.batch_size) {
      int end = std::min(ds.size(), start + cfg.batch_size);
      std::vector<int> idx(order.begin() + start, order.begin() + end);
      Tensor batch = ds.gather(idx);
      std::vector<int> targets(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) targets[i] = ds.labels[idx[i]];
      model.extractor().zero_grads();
      model.head().zero_grads();
      Tensor logits = model.forward(batch, true);
      epoch_loss += output_layer_loss(logits, targets);
      ++batches;
      Tensor glogits = output_layer_loss_grad(logits, targets);
      model.backward_to_input(glogits, Tensor());
      if (sgd) sgd->step();
      if (adam) adam->step();
    }
    out.epoch_loss.push_back(epoch_loss / std::max(1, batches));
  }
  model.set_frozen(true);
  out.final_train_accuracy = accuracy(model, ds);
  return out;
}

FeatureCentroids compute_centroids(ClassifierSplit& split, const Dataset& ds) {
  check(split.frozen(), "compute_centroids: extractor must be frozen");
  check(ds.size() > 0, "compute_centroids: empty dataset");
  int k = split.num_classes(), d = split.latent_dim();
  check(ds.num_classes == k, "compute_centroids: class count mismatch");
  std::vector<long> counts(k, 0);
  for (int l : ds.labels) counts[l]++;
  for (int c = 0; c < k; ++c)
    check(counts[c] > 0,
          "compute_centroids: class " + std::to_string(c) + " has no samples");

  std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
  const int bs = 128;
  for (int start = 0; start < ds.size(); start += bs) {
    int end = std::min(ds.size(), start + bs);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Tensor z = split.features(ds.gather(idx), false);
    for (int r = 0; r < z.n; ++r) {
      auto& acc = sums[ds.labels[start + r]];
      const float* row = z.data() + static_cast<size_t>(r) * d;
      for (int j = 0; j < d; ++j) acc[j] += row[j];
    }
  }
  FeatureCentroids cents;
  cents.centroids = Tensor::matrix(k, d);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j)
      cents.centroids.v[static_cast<size_t>(c) * d + j] =
          static_cast<float>(sums[c][j] / counts[c]);
  return cents;
}

std::vector<int> predict(ClassifierSplit& split, const Tensor& images) {
  Tensor logits = split.forward(images, false);
  std::vector<int> out(logits.n);
  for (int ni = 0; ni < logits.n; ++ni) {
    const float* row = logits.data() + static_cast<size_t>(ni) * logits.c;
    out[ni] = static_cast<int>(std::max_element(row, row + logits.c) - row);
  }
  return out;
}

double accuracy(ClassifierSplit& split, const Dataset& ds, int batch_size) {
  check(ds.size() > 0, "accuracy: empty dataset");
  long correct = 0;
  for (int start = 0; start < ds.size(); start += batch_size) {
    int end = std::min(ds.size(), start + batch_size);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto preds = predict(split, ds.gather(idx));
    for (int r = 0; r < end - start; ++r)
      if (preds[r] == ds.labels[start + r]) ++correct;
  }
  return static_cast<double>(correct) / ds.size();
}

// --------------------------------------------------------- TriggerGenerator

std::array<int, 3> TriggerGenerator::solve_output_padding(int image_size) {
  auto encoder_ok = [](int s, int& latent) {
    int e1 = (s - 1) / 3 + 1;          // conv k3 s3 p1
    if (e1 < 2) return false;
    int p1 = (e1 - 2) / 2 + 1;         // maxpool 2/2
    int e2 = (p1 - 1) / 2 + 1;         // conv k3 s2 p1
    if (e2 < 2) return false;
    latent = (e2 - 2) / 2 + 1;         // maxpool 2/2
    return latent >= 1;
  };
  int latent = 0;
  if (encoder_ok(image_size, latent)) {
    for (int op1 = 0; op1 < 2; ++op1)
      for (int op2 = 0; op2 < 3; ++op2)
        for (int op3 = 0; op3 < 2; ++op3) {
          int d1 = (latent - 1) * 2 + 3 + op1;
          int d2 = 3 * d1 + op2;
          int d3 = 2 * d2 - 2 + op3;
          if (d3 == image_size) return {op1, op2, op3};
        }
  }
  std::string supported;
  for (int s = 8; s <= 64; ++s) {
    int l = 0;
    if (!encoder_ok(s, l)) continue;
    bool ok = false;
    for (int op1 = 0; op1 < 2 && !ok; ++op1)
      for (int op2 = 0; op2 < 3 && !ok; ++op2)
        for (int op3 = 0; op3 < 2 && !ok; ++op3)
          ok = 2 * (3 * ((l - 1) * 2 + 3 + op1) + op2) - 2 + op3 == s;
    if (ok) supported += (supported.empty() ? "" : ", ") + std::to_string(s);
  }
  throw ValidationError(
      "trigger generator cannot reproduce a " + std::to_string(image_size) +
      "px input; supported sizes up to 64px: " + supported);
}

TriggerGenerator::TriggerGenerator(int channels, int image_size, int num_classes,
                                   float epsilon, uint64_t seed)
    : channels_(channels), image_size_(image_size), num_classes_(num_classes),
      epsilon_(epsilon) {
  check(epsilon > 0.0f, "trigger generator: epsilon must be positive");
  check(num_classes >= 2, "trigger generator: need at least two classes");
  output_padding_ = solve_output_padding(image_size);
  Rng rng(Rng::next_hash(seed, 0x9e41ULL));
  using namespace nn;
  net_.add(std::make_unique<Conv2d>(channels + num_classes, 16, 3, 3, 1, rng));
  net_.add(std::make_unique<BatchNorm2d>(16));
  net_.add(std::make_unique<ReLU>());
  net_.add(std::make_unique<MaxPool2d>(2, 2));
  net_.add(std::make_unique<Conv2d>(16, 64, 3, 2, 1, rng));
  net_.add(std::make_unique<BatchNorm2d>(64));
  net_.add(std::make_unique<ReLU>());
  net_.add(std::make_unique<MaxPool2d>(2, 2));
  net_.add(std::make_unique<ConvTranspose2d>(64, 128, 3, 2, 0, output_padding_[0], rng));
  net_.add(std::make_unique<BatchNorm2d>(128));
  net_.add(std::make_unique<ReLU>());
  net_.add(std::make_unique<ConvTranspose2d>(128, 64, 5, 3, 1, output_padding_[1], rng));
  net_.add(std::make_unique<BatchNorm2d>(64));
  net_.add(std::make_unique<ReLU>());
  net_.add(std::make_unique<ConvTranspose2d>(64, channels, 2, 2, 1, output_padding_[2], rng));
  net_.add(std::make_unique<BatchNorm2d>(channels));
  net_.add(std::make_unique<Tanh>());
}

Tensor TriggerGenerator::generate(const Tensor& images,
                                  const std::vector<int>& class_ids, bool train) {
  check(images.c == channels_ && images.h == image_size_ && images.w == image_size_,
        "trigger generator: image shape incompatible with the architecture");
  check(static_cast<int>(class_ids.size()) == images.n,
        "trigger generator: one class id per image required");
  for (int cid : class_ids)
    check(cid >= 0 && cid < num_classes_, "trigger generator: class id out of range");

  Tensor input(images.n, channels_ + num_classes_, image_size_, image_size_);
  int plane = image_size_ * image_size_;
  for (int ni = 0; ni < images.n; ++ni) {
    std::memcpy(input.slice(ni), images.slice(ni),
                static_cast<size_t>(channels_) * plane * sizeof(float));
    float* cond = input.slice(ni) + static_cast<size_t>(channels_) * plane;
    std::fill(cond + static_cast<size_t>(class_ids[ni]) * plane,
              cond + static_cast<size_t>(class_ids[ni] + 1) * plane, 1.0f);
  }
  Tensor y = net_.forward(input, train);
  check(y.c == channels_ && y.h == image_size_ && y.w == image_size_,
        "trigger generator: internal shape error");
  for (auto& f : y.v) f *= epsilon_;
  return y;
}

void TriggerGenerator::backward(const Tensor& grad_trigger) {
  Tensor g = grad_trigger;
  for (auto& f : g.v) f *= epsilon_;
  net_.backward(g);
}

Tensor generate_trigger(TriggerGenerator& gen, const Tensor& image,
                        const std::vector<float>& class_vec) {
  check(static_cast<int>(class_vec.size()) == gen.num_classes(),
        "generate_trigger: class vector length mismatch");
  int hot = -1;
  for (size_t i = 0; i < class_vec.size(); ++i) {
    if (class_vec[i] == 1.0f) {
      check(hot < 0, "generate_trigger: class vector is not one-hot");
      hot = static_cast<int>(i);
    } else {
      check(class_vec[i] == 0.0f, "generate_trigger: class vector is not one-hot");
    }
  }
  check(hot >= 0, "generate_trigger: class vector is not one-hot");
  check(image.n == 1, "generate_trigger: expected a single image");
  for (float f : image.v)
    check(f >= -1e-6f && f <= 1.0f + 1e-6f, "generate_trigger: pixels must be in [0,1]");
  return gen.generate(image, {hot}, false);
}

Tensor apply_trigger(const Tensor& image, const Tensor& trigger) {
  check(image.same_shape(trigger), "apply_trigger: shape mismatch");
  return clamp01(add(image, trigger));
}

// -------------------------------------------------------------- checkpoints

namespace {

constexpr uint16_t kCkptVersion = 1;

void write_u16(std::ofstream& f, uint16_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint16_t read_u16(std::ifstream& f) {
  uint16_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_blob(std::ofstream& f, const Tensor& t) {
  write_u32(f, static_cast<uint32_t>(t.numel()));
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void read_blob(std::ifstream& f, Tensor& t, const std::string& path) {
  uint32_t numel = read_u32(f);
  if (numel != t.numel())
    throw IoError("checkpoint " + path + ": parameter size mismatch (file " +
                  std::to_string(numel) + ", model " + std::to_string(t.numel()) + ")");
  f.read(reinterpret_cast<char*>(t.data()),
         static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void save_container(const std::string& path, uint16_t kind, const json& header,
                    std::vector<nn::Param*> params, std::vector<Tensor*> buffers) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write("FFCK", 4);
  write_u16(f, kCkptVersion);
  write_u16(f, kind);
  std::string hdr = header.dump();
  write_u32(f, static_cast<uint32_t>(hdr.size()));
  f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  write_u32(f, static_cast<uint32_t>(params.size()));
  for (auto* p : params) write_blob(f, p->value);
  write_u32(f, static_cast<uint32_t>(buffers.size()));
  for (auto* b : buffers) write_blob(f, *b);
  if (!f) throw IoError("write failed for checkpoint " + path);
}

json load_container_header(std::ifstream& f, const std::string& path,
                           uint16_t expect_kind) {
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "FFCK", 4) != 0)
    throw IoError("checkpoint " + path + ": bad magic");
  uint16_t version = read_u16(f);
  if (version != kCkptVersion)
    throw IoError("checkpoint " + path + ": unsupported version " +
                  std::to_string(version));
  uint16_t kind = read_u16(f);
  if (kind != expect_kind)
    throw IoError("checkpoint " + path + ": wrong checkpoint kind");
  uint32_t hlen = read_u32(f);
  std::string hdr(hlen, '\0');
  f.read(hdr.data(), hlen);
  if (!f) throw IoError("checkpoint " + path + ": truncated header");
  return json::parse(hdr);
}

void load_params_and_buffers(std::ifstream& f, const std::string& path,
                             std::vector<nn::Param*> params,
                             std::vector<Tensor*> buffers) {
  uint32_t pcount = read_u32(f);
  if (pcount != params.size())
    throw IoError("checkpoint " + path + ": parameter count mismatch");
  for (auto* p : params) read_blob(f, p->value, path);
  uint32_t bcount = read_u32(f);
  if (bcount != buffers.size())
    throw IoError("checkpoint " + path + ": buffer count mismatch");
  for (auto* b : buffers) read_blob(f, *b, path);
  if (!f) throw IoError("checkpoint " + path + ": truncated data");
}

}  // namespace

void save_classifier(ClassifierSplit& model, const std::string& path) {
  json header = {{"arch", model.arch_id()},
                 {"channels", model.channels()},
                 {"image_size", model.image_size()},
                 {"num_classes", model.num_classes()},
                 {"latent_dim", model.latent_dim()}};
  auto buffers = model.extractor().buffers();
  auto hb = model.head().buffers();
  buffers.insert(buffers.end(), hb.begin(), hb.end());
  save_container(path, 1, header, model.params(), buffers);
}

ClassifierSplit load_classifier(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  json header = load_container_header(f, path, 1);
  ClassifierSplit model = ClassifierSplit::build(
      header.at("arch").get<std::string>(), header.at("channels").get<int>(),
      header.at("image_size").get<int>(), header.at("num_classes").get<int>(), 0);
  auto buffers = model.extractor().buffers();
  auto hb = model.head().buffers();
  buffers.insert(buffers.end(), hb.begin(), hb.end());
  load_params_and_buffers(f, path, model.params(), buffers);
  model.set_frozen(true);
  return model;
}

void save_generator(TriggerGenerator& gen, const std::string& path) {
  json header = {{"channels", gen.channels()},
                 {"image_size", gen.image_size()},
                 {"num_classes", gen.num_classes()},
                 {"epsilon", gen.epsilon()},
                 {"output_padding", gen.output_padding()},
                 {"conditioning", "onehot-planes-concat"}};
  save_container(path, 2, header, gen.params(), gen.net().buffers());
}

TriggerGenerator load_generator(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  json header = load_container_header(f, path, 2);
  TriggerGenerator gen(header.at("channels").get<int>(),
                       header.at("image_size").get<int>(),
                       header.at("num_classes").get<int>(),
                       header.at("epsilon").get<float>(), 0);
  load_params_and_buffers(f, path, gen.params(), gen.net().buffers());
  return gen;
}

void save_centroids(const FeatureCentroids& cents, const std::string& path) {
  json header = {{"num_classes", cents.centroids.n},
                 {"latent_dim", cents.centroids.c}};
  nn::Param p;
  p.value = cents.centroids;
  save_container(path, 3, header, {&p}, {});
}

FeatureCentroids load_centroids(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  json header = load_container_header(f, path, 3);
  FeatureCentroids cents;
  cents.centroids = Tensor::matrix(header.at("num_classes").get<int>(),
                                   header.at("latent_dim").get<int>());
  nn::Param p;
  p.value = cents.centroids;
  load_params_and_buffers(f, path, {&p}, {});
  cents.centroids = p.value;
  return cents;
}

}  // namespace ffcba
