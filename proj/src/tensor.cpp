#include "ffcba/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ffcba {

Tensor clamp01(const Tensor& x) {
  Tensor out = x;
  for (auto& f : out.v) f = std::min(1.0f, std::max(0.0f, f));
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "tensor add: shape mismatch");
  Tensor out = a;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.v[i]) - b.v[i]));
  return m;
}

double max_abs(const Tensor& x) {
  double m = 0.0;
  for (float f : x.v) m = std::max(m, std::abs(static_cast<double>(f)));
  return m;
}

double sum_squares(const Tensor& x) {
  double s = 0.0;
  for (float f : x.v) s += static_cast<double>(f) * f;
  return s;
}

Tensor quantize255(const Tensor& x) {
  Tensor out = x;
  for (auto& f : out.v) {
    float q = std::round(std::min(1.0f, std::max(0.0f, f)) * 255.0f);
    f = q / 255.0f;
  }
  return out;
}

uint64_t bytes_hash(const Tensor& x, uint64_t h) {
  const unsigned char* p = reinterpret_cast<const unsigned char*>(x.v.data());
  size_t len = x.v.size() * sizeof(float);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ffcba
