#include "ffcba/wavelet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ffcba {

namespace {

constexpr float kInvSqrt2 = 0.70710678118654752440f;

// One analysis level on a single-channel plane: out quadrants
// [LL HL; LH HH] packed into four planes of half size.
void haar_level(const float* x, int h, int w, float* ll, float* hl, float* lh,
                float* hh) {
  int h2 = h / 2, w2 = w / 2;
  std::vector<float> rows(static_cast<size_t>(h) * w);
  // transform along width: pairs of columns -> approx | detail
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w2; ++j) {
      float a = x[i * w + 2 * j], b = x[i * w + 2 * j + 1];
      rows[i * w + j] = (a + b) * kInvSqrt2;
      rows[i * w + w2 + j] = (a - b) * kInvSqrt2;
    }
  }
  // transform along height
  for (int i = 0; i < h2; ++i) {
    for (int j = 0; j < w2; ++j) {
      float a = rows[(2 * i) * w + j], b = rows[(2 * i + 1) * w + j];
      float c = rows[(2 * i) * w + w2 + j], d = rows[(2 * i + 1) * w + w2 + j];
      ll[i * w2 + j] = (a + b) * kInvSqrt2;
      lh[i * w2 + j] = (a - b) * kInvSqrt2;
      hl[i * w2 + j] = (c + d) * kInvSqrt2;
      hh[i * w2 + j] = (c - d) * kInvSqrt2;
    }
  }
}

void haar_level_inv(const float* ll, const float* hl, const float* lh,
                    const float* hh, int h, int w, float* x) {
  int h2 = h / 2, w2 = w / 2;
  std::vector<float> rows(static_cast<size_t>(h) * w);
  for (int i = 0; i < h2; ++i) {
    for (int j = 0; j < w2; ++j) {
      float a = ll[i * w2 + j], b = lh[i * w2 + j];
      float c = hl[i * w2 + j], d = hh[i * w2 + j];
      rows[(2 * i) * w + j] = (a + b) * kInvSqrt2;
      rows[(2 * i + 1) * w + j] = (a - b) * kInvSqrt2;
      rows[(2 * i) * w + w2 + j] = (c + d) * kInvSqrt2;
      rows[(2 * i + 1) * w + w2 + j] = (c - d) * kInvSqrt2;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w2; ++j) {
      float a = rows[i * w + j], b = rows[i * w + w2 + j];
      x[i * w + 2 * j] = (a + b) * kInvSqrt2;
      x[i * w + 2 * j + 1] = (a - b) * kInvSqrt2;
    }
  }
}

void check_image(const Tensor& image) {
  check(image.n == 1, "sdwt: expected a single image (n == 1)");
  check(image.numel() > 0, "sdwt: empty image");
  check(image.h % 4 == 0 && image.w % 4 == 0,
        "sdwt: image height and width must be divisible by 4, got " +
            std::to_string(image.h) + "x" + std::to_string(image.w));
  for (float f : image.v)
    check(f >= -1e-6f && f <= 1.0f + 1e-6f,
          "sdwt: pixel values must lie in [0,1]");
}

}  // namespace

WaveletPyramid sdwt_decompose(const Tensor& image) {
  check_image(image);
  int c = image.c, h = image.h, w = image.w;
  WaveletPyramid pyr;
  pyr.src_c = c;
  pyr.src_h = h;
  pyr.src_w = w;
  pyr.yl = Tensor(1, c, h / 4, w / 4);
  for (int b = 0; b < 3; ++b) pyr.yh[b] = Tensor(1, c, h / 2, w / 2);
  for (int b = 3; b < 6; ++b) pyr.yh[b] = Tensor(1, c, h / 4, w / 4);

  Tensor ll1(1, c, h / 2, w / 2);
  for (int ch = 0; ch < c; ++ch) {
    const float* src = image.data() + static_cast<size_t>(ch) * h * w;
    haar_level(src, h, w, ll1.data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
               pyr.yh[0].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
               pyr.yh[1].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
               pyr.yh[2].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2));
    haar_level(ll1.data() + static_cast<size_t>(ch) * (h / 2) * (w / 2), h / 2,
               w / 2, pyr.yl.data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
               pyr.yh[3].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
               pyr.yh[4].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
               pyr.yh[5].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4));
  }
  return pyr;
}

Tensor sdwt_reconstruct(const WaveletPyramid& pyr) {
  int c = pyr.src_c, h = pyr.src_h, w = pyr.src_w;
  check(c > 0 && h > 0 && w > 0, "sdwt_reconstruct: empty pyramid");
  check(pyr.yl.c == c && pyr.yl.h == h / 4 && pyr.yl.w == w / 4,
        "sdwt_reconstruct: yl shape inconsistent with source shape");
  for (int b = 0; b < 3; ++b)
    check(pyr.yh[b].c == c && pyr.yh[b].h == h / 2 && pyr.yh[b].w == w / 2,
          "sdwt_reconstruct: level-1 band shape mismatch");
  for (int b = 3; b < 6; ++b)
    check(pyr.yh[b].c == c && pyr.yh[b].h == h / 4 && pyr.yh[b].w == w / 4,
          "sdwt_reconstruct: level-2 band shape mismatch");

  Tensor out(1, c, h, w);
  Tensor ll1(1, c, h / 2, w / 2);
  for (int ch = 0; ch < c; ++ch) {
    haar_level_inv(pyr.yl.data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
                   pyr.yh[3].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
                   pyr.yh[4].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
                   pyr.yh[5].data() + static_cast<size_t>(ch) * (h / 4) * (w / 4),
                   h / 2, w / 2,
                   ll1.data() + static_cast<size_t>(ch) * (h / 2) * (w / 2));
    haar_level_inv(ll1.data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
                   pyr.yh[0].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
                   pyr.yh[1].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
                   pyr.yh[2].data() + static_cast<size_t>(ch) * (h / 2) * (w / 2),
                   h, w, out.data() + static_cast<size_t>(ch) * h * w);
  }
  return out;
}

Tensor perturb_midhigh(const Tensor& x_c, const Tensor& x_r, float k) {
  check(x_c.same_shape(x_r), "perturb_midhigh: shape mismatch between x_c and x_r");
  check(k >= 0.0f, "perturb_midhigh: mixing gain k must be >= 0");
  if (k == 0.0f) return clamp01(x_c);
  WaveletPyramid ref = sdwt_decompose(x_r);
  ref.yl.zero();
  for (auto& band : ref.yh)
    for (auto& f : band.v) f *= k;
  Tensor detail = sdwt_reconstruct(ref);
  Tensor out = x_c;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += detail.v[i];
  return clamp01(out);
}

namespace {

void write_u16(std::ofstream& f, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  f.write(reinterpret_cast<char*>(b), 2);
}

void write_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<char*>(b), 4);
}

uint16_t read_u16(std::ifstream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_band(std::ofstream& f, const Tensor& t) {
  write_u32(f, static_cast<uint32_t>(t.c));
  write_u32(f, static_cast<uint32_t>(t.h));
  write_u32(f, static_cast<uint32_t>(t.w));
  f.write(reinterpret_cast<const char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(float)));
}

Tensor read_band(std::ifstream& f) {
  int c = static_cast<int>(read_u32(f));
  int h = static_cast<int>(read_u32(f));
  int w = static_cast<int>(read_u32(f));
  Tensor t(1, c, h, w);
  f.read(reinterpret_cast<char*>(t.v.data()),
         static_cast<std::streamsize>(t.v.size() * sizeof(float)));
  return t;
}

}  // namespace

void dump_pyramid(const WaveletPyramid& pyr, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("dump_pyramid: cannot open " + path);
  f.write("FFPY", 4);
  write_u16(f, 1);  // version
  write_u16(f, 0);  // flags
  write_u32(f, static_cast<uint32_t>(pyr.src_c));
  write_u32(f, static_cast<uint32_t>(pyr.src_h));
  write_u32(f, static_cast<uint32_t>(pyr.src_w));
  write_u32(f, 7);  // band count: yl + six detail bands
  write_band(f, pyr.yl);
  for (const auto& band : pyr.yh) write_band(f, band);
  if (!f) throw IoError("dump_pyramid: write failed for " + path);
}

WaveletPyramid load_pyramid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_pyramid: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, "FFPY", 4) != 0)
    throw IoError("load_pyramid: bad magic in " + path);
  uint16_t version = read_u16(f);
  if (version != 1) throw IoError("load_pyramid: unsupported version");
  read_u16(f);  // flags
  WaveletPyramid pyr;
  pyr.src_c = static_cast<int>(read_u32(f));
  pyr.src_h = static_cast<int>(read_u32(f));
  pyr.src_w = static_cast<int>(read_u32(f));
  uint32_t bands = read_u32(f);
  if (bands != 7) throw IoError("load_pyramid: unexpected band count");
  pyr.yl = read_band(f);
  for (auto& band : pyr.yh) band = read_band(f);
  if (!f) throw IoError("load_pyramid: truncated file " + path);
  return pyr;
}

}  // namespace ffcba
