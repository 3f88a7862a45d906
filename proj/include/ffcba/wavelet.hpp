#pragma once

#include <array>
#include <string>

#include "ffcba/tensor.hpp"

namespace ffcba {

// Two-level orthonormal Haar decomposition of an image. yl holds the level-2
// approximation band; yh holds the six detail bands in the order
// {HL1, LH1, HH1, HL2, LH2, HH2}, where HL carries horizontal detail,
// LH vertical detail and HH diagonal detail. Channels are independent.
struct WaveletPyramid {
  Tensor yl;                  // (1, C, H/4, W/4)
  std::array<Tensor, 6> yh;   // level-1 bands at (H/2, W/2), level-2 at (H/4, W/4)
  int src_c = 0, src_h = 0, src_w = 0;
};

// image: (1, C, H, W), H and W divisible by 4, values in [0, 1].
WaveletPyramid sdwt_decompose(const Tensor& image);

// Exact linear inverse. Output is intentionally not clamped so that the
// transform pair stays a true inverse; callers clamp when they need pixels.
Tensor sdwt_reconstruct(const WaveletPyramid& pyr);

// Mixes the detail bands of a reference image into a clean one:
// out = clamp01(IS-DWT{YL_c, YH_c + k * YH_r}). Computed through the linear
// identity x_c + k * IS-DWT{0, YH_r} so that k = 0 returns x_c bit-exactly.
Tensor perturb_midhigh(const Tensor& x_c, const Tensor& x_r, float k);

// Binary band dump ("FFPY"): magic, u16 version, u16 flags, u32 source dims
// (C, H, W), u32 band count, then per band u32 dims (C, H, W) followed by
// little-endian f32 coefficients. Band order: yl, HL1, LH1, HH1, HL2, LH2, HH2.
void dump_pyramid(const WaveletPyramid& pyr, const std::string& path);
WaveletPyramid load_pyramid(const std::string& path);

}  // namespace ffcba
