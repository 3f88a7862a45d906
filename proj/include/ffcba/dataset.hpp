#pragma once

#include <string>
#include <vector>

#include "ffcba/tensor.hpp"

namespace ffcba {

// In-memory labeled image set, NCHW float pixels in [0,1]. All loaders and
// generators quantize pixels to the 1/255 grid so that 8-bit persistence
// round-trips bit-exactly.
struct Dataset {
  int channels = 0, height = 0, width = 0, num_classes = 0;
  std::vector<float> images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
  size_t image_numel() const {
    return static_cast<size_t>(channels) * height * width;
  }
  Tensor image(int i) const;
  void set_image(int i, const Tensor& t);
  Tensor gather(const std::vector<int>& idx) const;
  std::vector<std::vector<int>> indices_by_class() const;
};

// Procedural 10-way (configurable) texture dataset: each class is an oriented
// grating plus a smooth per-class blob pattern, with per-sample phase,
// translation, background and pixel noise. Classes carry both low-frequency
// and mid-high-frequency structure so detail-band mixing visibly blurs them.
struct ToyParams {
  int num_classes = 10;
  int image_size = 24;  // square, divisible by 4
  int channels = 3;
  uint64_t seed = 1;
  float noise_std = 0.06f;
  float background_mix = 0.22f;
  int translate_px = 2;
  float texture_amp = 0.26f;  // grating strength; lower is harder
  int styles_per_class = 1;   // sub-styles per class; more is harder
  // fraction of samples whose class texture is heavily attenuated; these are
  // intrinsically hard to classify from natural features
  float hard_fraction = 0.0f;
};

Dataset make_toy_dataset(const ToyParams& params, int per_class,
                         uint64_t stream);

// PPM (P6) for 3-channel, PGM (P5) for 1-channel, 8-bit.
Tensor load_image_file(const std::string& path);
void save_image_file(const Tensor& image, const std::string& path);

// root/<class_dir>/<image files>, classes ordered by directory name,
// files ordered by name. All images must share one shape.
Dataset load_class_dirs(const std::string& root);

// Flat binary records: [u8 label][channels*h*w bytes, channel-planar].
Dataset load_binary_archive(const std::vector<std::string>& files, int channels,
                            int height, int width, int num_classes);

// Writes root/class_<k>/<global index>.ppm|pgm. Reloading with
// load_class_dirs yields the same samples grouped by class.
void save_as_class_dirs(const Dataset& ds, const std::string& root);

// Center crop; used to bring foreign image sizes onto the 4-divisible grid.
Dataset center_crop(const Dataset& ds, int target_h, int target_w);

Dataset subset(const Dataset& ds, const std::vector<int>& idx);

}  // namespace ffcba
