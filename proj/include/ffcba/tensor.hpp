#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <vector>

#include "ffcba/common.hpp"

namespace ffcba {

// 64-byte-aligned storage for everything SIMD kernels touch. Heap-dependent
// alignment changes the peel split of vectorized reductions and with it the
// floating-point rounding, which breaks bit-exact reproducibility.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, size_t) noexcept { ::operator delete(p, kAlign); }
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

using FloatVec = std::vector<float, AlignedAllocator<float>>;

// Dense float tensor in NCHW layout. Vectors and matrices use (n, c, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  FloatVec v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  static Tensor matrix(int rows, int cols) { return Tensor(rows, cols, 1, 1); }

  size_t numel() const { return v.size(); }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  int plane() const { return h * w; }
  int chw() const { return c * h * w; }

  float& at(int ni, int ci, int hi, int wi) {
    return v[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }
  float at(int ni, int ci, int hi, int wi) const {
    return v[((static_cast<size_t>(ni) * c + ci) * h + hi) * w + wi];
  }

  float* data() { return v.data(); }
  const float* data() const { return v.data(); }

  float* slice(int ni) { return v.data() + static_cast<size_t>(ni) * chw(); }
  const float* slice(int ni) const {
    return v.data() + static_cast<size_t>(ni) * chw();
  }

  void zero() { std::fill(v.begin(), v.end(), 0.0f); }
};

// Elementwise helpers used across modules.
Tensor clamp01(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& x);
double sum_squares(const Tensor& x);
// Quantize to the 1/255 grid used by 8-bit image storage.
Tensor quantize255(const Tensor& x);
// FNV-1a over the raw float bytes; used for frozen-parameter audits.
uint64_t bytes_hash(const Tensor& x, uint64_t h = 1469598103934665603ULL);

}  // namespace ffcba
