#include "ffcba/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ffcba/rng.hpp"

namespace fs = std::filesystem;

namespace ffcba {

Tensor Dataset::image(int i) const {
  check(i >= 0 && i < size(), "dataset: image index out of range");
  Tensor t(1, channels, height, width);
  std::memcpy(t.data(), images.data() + static_cast<size_t>(i) * image_numel(),
              image_numel() * sizeof(float));
  return t;
}

void Dataset::set_image(int i, const Tensor& t) {
  check(i >= 0 && i < size(), "dataset: image index out of range");
  check(t.n == 1 && t.c == channels && t.h == height && t.w == width,
        "dataset: image shape mismatch");
  std::memcpy(images.data() + static_cast<size_t>(i) * image_numel(), t.data(),
              image_numel() * sizeof(float));
}

Tensor Dataset::gather(const std::vector<int>& idx) const {
  Tensor t(static_cast<int>(idx.size()), channels, height, width);
  for (size_t b = 0; b < idx.size(); ++b) {
    check(idx[b] >= 0 && idx[b] < size(), "dataset: gather index out of range");
    std::memcpy(t.slice(static_cast<int>(b)),
                images.data() + static_cast<size_t>(idx[b]) * image_numel(),
                image_numel() * sizeof(float));
  }
  return t;
}

std::vector<std::vector<int>> Dataset::indices_by_class() const {
  std::vector<std::vector<int>> by_class(num_classes);
  for (int i = 0; i < size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

namespace {

struct ClassStyle {
  double theta;            // grating orientation
  double cycles;           // grating frequency in cycles per image
  std::vector<float> color;       // per-channel grating weight
  std::vector<float> blob;        // per-channel smooth pattern (c*h*w)
};

// styles are indexed [class * styles_per_class + variant]
std::vector<ClassStyle> make_styles(const ToyParams& p) {
  Rng rng(Rng::next_hash(p.seed, 0xf0f0f0f0ULL));
  std::vector<ClassStyle> styles(static_cast<size_t>(p.num_classes) *
                                 p.styles_per_class);
  int s = p.image_size;
  for (int k = 0; k < p.num_classes; ++k) {
    for (int variant = 0; variant < p.styles_per_class; ++variant) {
      auto& st = styles[static_cast<size_t>(k) * p.styles_per_class + variant];
      st.theta = M_PI * k / p.num_classes + variant * 0.35 + rng.uniform() * 0.08;
      st.cycles = 3.0 + ((k + variant) % 3) + rng.uniform() * 0.4;
      st.color.resize(p.channels);
      for (int c = 0; c < p.channels; ++c)
        st.color[c] =
            rng.uniformf(0.35f, 1.0f) * (rng.uniform() < 0.5 ? -1.0f : 1.0f);
      // smooth blob pattern: a few signed gaussian bumps per channel
      st.blob.assign(static_cast<size_t>(p.channels) * s * s, 0.0f);
      for (int c = 0; c < p.channels; ++c) {
        for (int bump = 0; bump < 3; ++bump) {
          double cx = rng.uniform() * s, cy = rng.uniform() * s;
          double sigma = s * (0.18 + 0.12 * rng.uniform());
          double amp =
              (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * rng.uniform());
          for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
              double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
              st.blob[(static_cast<size_t>(c) * s + y) * s + x] +=
                  static_cast<float>(amp * std::exp(-d2 / (2 * sigma * sigma)));
            }
        }
      }
    }
  }
  return styles;
}

}  // namespace

Dataset make_toy_dataset(const ToyParams& p, int per_class, uint64_t stream) {
  check(p.num_classes >= 2, "toy dataset: need at least two classes");
  check(p.image_size % 4 == 0, "toy dataset: image size must be divisible by 4");
  check(p.channels == 1 || p.channels == 3, "toy dataset: channels must be 1 or 3");
  check(per_class >= 1, "toy dataset: per-class count must be positive");
  check(p.styles_per_class >= 1, "toy dataset: need at least one style per class");
  check(p.hard_fraction >= 0.0f && p.hard_fraction <= 1.0f,
        "toy dataset: hard_fraction must lie in [0,1]");

  auto styles = make_styles(p);
  int s = p.image_size;
  Dataset ds;
  ds.channels = p.channels;
  ds.height = s;
  ds.width = s;
  ds.num_classes = p.num_classes;
  ds.images.resize(static_cast<size_t>(p.num_classes) * per_class * p.channels * s * s);
  ds.labels.resize(static_cast<size_t>(p.num_classes) * per_class);

  Rng rng(Rng::next_hash(p.seed, stream));
  int idx = 0;
  for (int k = 0; k < p.num_classes; ++k) {
    for (int i = 0; i < per_class; ++i, ++idx) {
      const auto& st = styles[static_cast<size_t>(k) * p.styles_per_class +
                              rng.uniform_int(p.styles_per_class)];
      ds.labels[idx] = k;
      double amp_scale = rng.uniform() < p.hard_fraction ? 0.25 : 1.0;
      double phase = rng.uniform() * 2.0 * M_PI;
      double theta = st.theta + rng.normal() * 0.05;
      int dx = rng.uniform_int(2 * p.translate_px + 1) - p.translate_px;
      int dy = rng.uniform_int(2 * p.translate_px + 1) - p.translate_px;
      // low-order cosine background shared across channels
      double b1 = rng.normal(), b2 = rng.normal(), b3 = rng.normal();
      float* img = ds.images.data() + static_cast<size_t>(idx) * ds.image_numel();
      double cs = std::cos(theta), sn = std::sin(theta);
      double freq = 2.0 * M_PI * st.cycles / s;
      for (int c = 0; c < p.channels; ++c) {
        for (int y = 0; y < s; ++y) {
          for (int x = 0; x < s; ++x) {
            double g = std::sin(freq * (cs * x + sn * y) + phase);
            int by = ((y + dy) % s + s) % s, bx = ((x + dx) % s + s) % s;
            double blob = st.blob[(static_cast<size_t>(c) * s + by) * s + bx];
            double bg = b1 * std::cos(M_PI * x / s) + b2 * std::cos(M_PI * y / s) +
                        b3 * std::cos(M_PI * (x + y) / s);
            double val = 0.5 + amp_scale * (p.texture_amp * g * st.color[c] + 0.20 * blob) +
                         p.background_mix * 0.3 * bg + rng.normal() * p.noise_std;
            img[(static_cast<size_t>(c) * s + y) * s + x] =
                static_cast<float>(std::min(1.0, std::max(0.0, val)));
          }
        }
      }
    }
  }
  // storage grid; makes PPM persistence an exact round-trip
  for (auto& f : ds.images) f = std::round(f * 255.0f) / 255.0f;
  return ds;
}

// ------------------------------------------------------------- image files

namespace {

int read_pnm_token(std::istream& in) {
  // skips whitespace and '#' comments
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  in >> value;
  return value;
}

}  // namespace

Tensor load_image_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image " + path);
  std::string magic;
  f >> magic;
  int channels;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw IoError("unsupported image format in " + path + " (want P5/P6)");
  }
  int w = read_pnm_token(f);
  int h = read_pnm_token(f);
  int maxval = read_pnm_token(f);
  if (w <= 0 || h <= 0 || maxval != 255)
    throw IoError("unsupported PNM header in " + path);
  f.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<size_t>(w) * h * channels);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("truncated image " + path);
  Tensor t(1, channels, h, w);
  // PNM is interleaved; tensors are channel-planar
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        t.at(0, c, y, x) = raw[(static_cast<size_t>(y) * w + x) * channels + c] / 255.0f;
  return t;
}

void save_image_file(const Tensor& image, const std::string& path) {
  check(image.n == 1, "save_image_file: expected a single image");
  check(image.c == 1 || image.c == 3, "save_image_file: channels must be 1 or 3");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write image " + path);
  f << (image.c == 3 ? "P6" : "P5") << "\n"
    << image.w << " " << image.h << "\n255\n";
  std::vector<unsigned char> raw(static_cast<size_t>(image.w) * image.h * image.c);
  for (int y = 0; y < image.h; ++y)
    for (int x = 0; x < image.w; ++x)
      for (int c = 0; c < image.c; ++c) {
        float v = std::min(1.0f, std::max(0.0f, image.at(0, c, y, x)));
        raw[(static_cast<size_t>(y) * image.w + x) * image.c + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  f.write(reinterpret_cast<const char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!f) throw IoError("write failed for " + path);
}

Dataset load_class_dirs(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  check(!class_dirs.empty(), "dataset root has no class directories: " + root);

  Dataset ds;
  ds.num_classes = static_cast<int>(class_dirs.size());
  for (int k = 0; k < ds.num_classes; ++k) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[k]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      Tensor img = load_image_file(file);
      if (ds.size() == 0) {
        ds.channels = img.c;
        ds.height = img.h;
        ds.width = img.w;
      }
      check(img.c == ds.channels && img.h == ds.height && img.w == ds.width,
            "dataset images disagree on shape: " + file);
      size_t off = ds.images.size();
      ds.images.resize(off + ds.image_numel());
      std::memcpy(ds.images.data() + off, img.data(),
                  ds.image_numel() * sizeof(float));
      ds.labels.push_back(k);
    }
  }
  check(ds.size() > 0, "dataset root contains no images: " + root);
  return ds;
}

Dataset load_binary_archive(const std::vector<std::string>& files, int channels,
                            int height, int width, int num_classes) {
  check(!files.empty(), "binary archive: no files given");
  check(channels > 0 && height > 0 && width > 0 && num_classes >= 2,
        "binary archive: invalid shape or class count");
  Dataset ds;
  ds.channels = channels;
  ds.height = height;
  ds.width = width;
  ds.num_classes = num_classes;
  size_t record = 1 + ds.image_numel();
  for (const auto& path : files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open archive " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() % record != 0)
      throw IoError("archive size is not a multiple of the record size: " + path);
    size_t count = buf.size() / record;
    for (size_t r = 0; r < count; ++r) {
      const unsigned char* p = buf.data() + r * record;
      int label = p[0];
      check(label < num_classes, "archive label out of range in " + path);
      ds.labels.push_back(label);
      size_t off = ds.images.size();
      ds.images.resize(off + ds.image_numel());
      for (size_t i = 0; i < ds.image_numel(); ++i)
        ds.images[off + i] = p[1 + i] / 255.0f;
    }
  }
  return ds;
}

void save_as_class_dirs(const Dataset& ds, const std::string& root) {
  fs::create_directories(root);
  const char* ext = ds.channels == 3 ? ".ppm" : ".pgm";
  for (int k = 0; k < ds.num_classes; ++k) {
    char dirname[32];
    std::snprintf(dirname, sizeof(dirname), "class_%03d", k);
    fs::create_directories(fs::path(root) / dirname);
  }
  for (int i = 0; i < ds.size(); ++i) {
    char dirname[32], filename[32];
    std::snprintf(dirname, sizeof(dirname), "class_%03d", ds.labels[i]);
    std::snprintf(filename, sizeof(filename), "%06d%s", i, ext);
    save_image_file(ds.image(i), (fs::path(root) / dirname / filename).string());
  }
}

Dataset center_crop(const Dataset& ds, int target_h, int target_w) {
  check(target_h > 0 && target_h <= ds.height && target_w > 0 && target_w <= ds.width,
        "center_crop: target exceeds source size");
  if (target_h == ds.height && target_w == ds.width) return ds;
  int oy = (ds.height - target_h) / 2, ox = (ds.width - target_w) / 2;
  Dataset out;
  out.channels = ds.channels;
  out.height = target_h;
  out.width = target_w;
  out.num_classes = ds.num_classes;
  out.labels = ds.labels;
  out.images.resize(static_cast<size_t>(ds.size()) * out.image_numel());
  for (int i = 0; i < ds.size(); ++i) {
    const float* src = ds.images.data() + static_cast<size_t>(i) * ds.image_numel();
    float* dst = out.images.data() + static_cast<size_t>(i) * out.image_numel();
    for (int c = 0; c < ds.channels; ++c)
      for (int y = 0; y < target_h; ++y)
        std::memcpy(dst + (static_cast<size_t>(c) * target_h + y) * target_w,
                    src + (static_cast<size_t>(c) * ds.height + oy + y) * ds.width + ox,
                    static_cast<size_t>(target_w) * sizeof(float));
  }
  return out;
}

Dataset subset(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  out.channels = ds.channels;
  out.height = ds.height;
  out.width = ds.width;
  out.num_classes = ds.num_classes;
  out.images.resize(idx.size() * ds.image_numel());
  out.labels.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < ds.size(), "subset: index out of range");
    out.labels[i] = ds.labels[idx[i]];
    std::memcpy(out.images.data() + i * ds.image_numel(),
                ds.images.data() + static_cast<size_t>(idx[i]) * ds.image_numel(),
                ds.image_numel() * sizeof(float));
  }
  return out;
}

}  // namespace ffcba
