#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <vector>

#include "ffcba/rng.hpp"
#include "ffcba/wavelet.hpp"

using namespace ffcba;

namespace {

Tensor random_image(int c, int h, int w, uint64_t seed) {
  Rng rng(seed);
  Tensor t(1, c, h, w);
  for (auto& f : t.v) f = static_cast<float>(rng.uniform());
  return t;
}

// Matrix-form oracle: one orthonormal Haar analysis level as an n x n matrix
// (top half averages pairs, bottom half differences), applied as H X H^T.
std::vector<std::vector<double>> haar_matrix(int n) {
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n / 2; ++i) {
    m[i][2 * i] = s;
    m[i][2 * i + 1] = s;
    m[n / 2 + i][2 * i] = s;
    m[n / 2 + i][2 * i + 1] = -s;
  }
  return m;
}

std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                        const std::vector<std::vector<double>>& b) {
  size_t n = a.size(), m = b[0].size(), inner = b.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(m, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t k = 0; k < inner; ++k)
      for (size_t j = 0; j < m; ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

std::vector<std::vector<double>> transpose(const std::vector<std::vector<double>>& a) {
  std::vector<std::vector<double>> out(a[0].size(), std::vector<double>(a.size()));
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

// Oracle two-level transform of a single-channel plane: returns the full
// coefficient grid after H (X) H^T at level 1 and again on the LL quadrant.
std::vector<std::vector<double>> oracle_two_level(const Tensor& img) {
  int n = img.h;
  std::vector<std::vector<double>> x(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x[i][j] = img.at(0, 0, i, j);
  auto h1 = haar_matrix(n);
  auto lvl1 = matmul(matmul(h1, x), transpose(h1));
  auto h2 = haar_matrix(n / 2);
  std::vector<std::vector<double>> ll(n / 2, std::vector<double>(n / 2));
  for (int i = 0; i < n / 2; ++i)
    for (int j = 0; j < n / 2; ++j) ll[i][j] = lvl1[i][j];
  auto lvl2 = matmul(matmul(h2, ll), transpose(h2));
  for (int i = 0; i < n / 2; ++i)
    for (int j = 0; j < n / 2; ++j) lvl1[i][j] = lvl2[i][j];
  return lvl1;
}

}  // namespace

TEST_CASE("constant image has zero detail bands and constant yl") {
  Tensor img(1, 3, 16, 16);
  std::fill(img.v.begin(), img.v.end(), 0.5f);
  WaveletPyramid pyr = sdwt_decompose(img);
  for (const auto& band : pyr.yh)
    for (float f : band.v) CHECK(f == doctest::Approx(0.0).epsilon(1e-7));
  // each Haar level scales a constant by 2, so yl is 4 * 0.5 across two levels
  for (float f : pyr.yl.v) CHECK(f == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("round-trip identity within 1e-5") {
  for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    Tensor img = random_image(3, 24, 24, seed);
    Tensor back = sdwt_reconstruct(sdwt_decompose(img));
    CHECK(max_abs_diff(img, back) < 1e-5);
  }
}

TEST_CASE("coefficient energy matches pixel energy against the matrix oracle") {
  Tensor img = random_image(1, 8, 8, 77);
  WaveletPyramid pyr = sdwt_decompose(img);
  double pixel_energy = sum_squares(img);
  double coef_energy = sum_squares(pyr.yl);
  for (const auto& band : pyr.yh) coef_energy += sum_squares(band);
  CHECK(std::abs(coef_energy - pixel_energy) / pixel_energy < 1e-4);

  // oracle grid must carry the same coefficients up to layout
  auto grid = oracle_two_level(img);
  double oracle_energy = 0.0;
  for (const auto& row : grid)
    for (double v : row) oracle_energy += v * v;
  CHECK(std::abs(coef_energy - oracle_energy) / pixel_energy < 1e-4);

  // spot-check the yl quadrant against the oracle grid
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(pyr.yl.at(0, 0, i, j) == doctest::Approx(grid[i][j]).epsilon(1e-5));
}

TEST_CASE("decompose rejects bad inputs") {
  CHECK_THROWS_AS(sdwt_decompose(Tensor(1, 1, 10, 10)), ValidationError);
  CHECK_THROWS_AS(sdwt_decompose(Tensor(1, 0, 0, 0)), ValidationError);
  Tensor out_of_range(1, 1, 8, 8);
  std::fill(out_of_range.v.begin(), out_of_range.v.end(), 1.5f);
  CHECK_THROWS_AS(sdwt_decompose(out_of_range), ValidationError);
}

TEST_CASE("reconstruct rejects band shape mismatch") {
  Tensor img = random_image(1, 16, 16, 5);
  WaveletPyramid pyr = sdwt_decompose(img);
  pyr.yh[0] = Tensor(1, 1, 4, 4);  // wrong level-1 size
  CHECK_THROWS_AS(sdwt_reconstruct(pyr), ValidationError);
}

TEST_CASE("pyramid of zeros reconstructs to the zero image") {
  Tensor img(1, 2, 16, 16);
  WaveletPyramid pyr = sdwt_decompose(img);
  Tensor back = sdwt_reconstruct(pyr);
  CHECK(max_abs(back) == 0.0);
}

TEST_CASE("scaling yh by 2 adds the detail component once (linearity oracle)") {
  Tensor img = random_image(1, 16, 16, 9);
  WaveletPyramid pyr = sdwt_decompose(img);

  // oracle: reconstruct the smooth and detail parts separately and sum
  WaveletPyramid smooth = pyr;
  for (auto& band : smooth.yh) band.zero();
  WaveletPyramid detail = pyr;
  detail.yl.zero();
  Tensor smooth_img = sdwt_reconstruct(smooth);
  Tensor detail_img = sdwt_reconstruct(detail);

  WaveletPyramid doubled = pyr;
  for (auto& band : doubled.yh)
    for (auto& f : band.v) f *= 2.0f;
  Tensor got = sdwt_reconstruct(doubled);

  Tensor expect = smooth_img;
  for (size_t i = 0; i < expect.v.size(); ++i)
    expect.v[i] += 2.0f * detail_img.v[i];
  CHECK(max_abs_diff(got, expect) < 1e-5);

  // x + (x - smooth(x)) form of the same identity
  Tensor alt = img;
  for (size_t i = 0; i < alt.v.size(); ++i)
    alt.v[i] += img.v[i] - smooth_img.v[i];
  CHECK(max_abs_diff(got, alt) < 1e-5);
}

TEST_CASE("zero-gain perturbation is the identity, bitwise") {
  Tensor xc = random_image(3, 16, 16, 11);
  Tensor xr = random_image(3, 16, 16, 12);
  Tensor out = perturb_midhigh(xc, xr, 0.0f);
  CHECK(std::memcmp(out.data(), xc.data(), xc.numel() * sizeof(float)) == 0);
}

TEST_CASE("perturbation matches the band-wise oracle") {
  Tensor xc = random_image(3, 16, 16, 21);
  Tensor xr = random_image(3, 16, 16, 22);
  for (float k : {1.0f, 1.5f}) {
    Tensor got = perturb_midhigh(xc, xr, k);
    WaveletPyramid pc = sdwt_decompose(xc);
    WaveletPyramid pr = sdwt_decompose(xr);
    WaveletPyramid mixed = pc;
    for (int b = 0; b < 6; ++b)
      for (size_t i = 0; i < mixed.yh[b].v.size(); ++i)
        mixed.yh[b].v[i] += k * pr.yh[b].v[i];
    Tensor expect = clamp01(sdwt_reconstruct(mixed));
    CHECK(max_abs_diff(got, expect) < 1e-5);
  }
}

TEST_CASE("self-perturbation at k=1 doubles detail bands") {
  Tensor xc = random_image(1, 16, 16, 31);
  // scale into the middle of the range so clamping cannot fire
  for (auto& f : xc.v) f = 0.4f + 0.2f * f;
  Tensor got = perturb_midhigh(xc, xc, 1.0f);
  WaveletPyramid doubled = sdwt_decompose(xc);
  for (auto& band : doubled.yh)
    for (auto& f : band.v) f *= 2.0f;
  Tensor expect = clamp01(sdwt_reconstruct(doubled));
  CHECK(max_abs_diff(got, expect) < 1e-5);
}

TEST_CASE("perturbation preserves the low band when no clamping occurs") {
  Tensor xc = random_image(3, 16, 16, 41);
  Tensor xr = random_image(3, 16, 16, 42);
  for (auto& f : xc.v) f = 0.45f + 0.1f * f;
  for (auto& f : xr.v) f = 0.45f + 0.1f * f;
  Tensor xp = perturb_midhigh(xc, xr, 1.2f);
  // verify nothing clamped
  Tensor unclamped = xc;
  WaveletPyramid ref = sdwt_decompose(xr);
  ref.yl.zero();
  for (auto& band : ref.yh)
    for (auto& f : band.v) f *= 1.2f;
  Tensor detail = sdwt_reconstruct(ref);
  bool clamped = false;
  for (size_t i = 0; i < xc.v.size(); ++i) {
    float pre = xc.v[i] + detail.v[i];
    if (pre < 0.0f || pre > 1.0f) clamped = true;
  }
  REQUIRE_FALSE(clamped);
  CHECK(max_abs_diff(sdwt_decompose(xp).yl, sdwt_decompose(xc).yl) < 1e-4);
}

TEST_CASE("detail bands of the perturbed image are affine in k") {
  Tensor xc = random_image(1, 16, 16, 51);
  Tensor xr = random_image(1, 16, 16, 52);
  for (auto& f : xc.v) f = 0.45f + 0.1f * f;
  for (auto& f : xr.v) f = 0.45f + 0.1f * f;
  auto band0 = [&](float k) {
    return sdwt_decompose(perturb_midhigh(xc, xr, k)).yh[0];
  };
  Tensor b1 = band0(1.1f), b2 = band0(1.3f), b3 = band0(1.5f);
  // equally spaced k values: the middle band is the average of the outer two
  for (size_t i = 0; i < b2.v.size(); ++i)
    CHECK(b2.v[i] == doctest::Approx(0.5f * (b1.v[i] + b3.v[i])).epsilon(1e-3).scale(1.0));
}

TEST_CASE("perturbation rejects shape mismatch and negative gain") {
  Tensor a = random_image(1, 16, 16, 61);
  Tensor b = random_image(1, 24, 24, 62);
  CHECK_THROWS_AS(perturb_midhigh(a, b, 1.5f), ValidationError);
  Tensor c = random_image(1, 16, 16, 63);
  CHECK_THROWS_AS(perturb_midhigh(a, c, -0.5f), ValidationError);
}

TEST_CASE("pyramid dump round-trips through the FFPY container") {
  Tensor img = random_image(3, 16, 16, 71);
  WaveletPyramid pyr = sdwt_decompose(img);
  std::string path =
      (std::filesystem::temp_directory_path() / "ffcba_test_pyr.ffpy").string();
  dump_pyramid(pyr, path);
  WaveletPyramid back = load_pyramid(path);
  CHECK(back.src_h == pyr.src_h);
  CHECK(max_abs_diff(back.yl, pyr.yl) == 0.0);
  for (int b = 0; b < 6; ++b) CHECK(max_abs_diff(back.yh[b], pyr.yh[b]) == 0.0);
  std::filesystem::remove(path);
}
