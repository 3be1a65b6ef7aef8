// NEON variants of the float kernels (aarch64 only).

#if defined(__aarch64__)

#include <arm_neon.h>

#include "hsicnn/kernels.hpp"

namespace hsicnn::kernels {

float dot_neon(const float* a, const float* b, std::size_t n) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = vfmaq_f32(acc, vld1q_f32(a + i), vld1q_f32(b + i));
  float s = vaddvq_f32(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(float alpha, const float* x, float* y, std::size_t n) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t vy = vld1q_f32(y + i);
    vy = vfmaq_f32(vy, va, vld1q_f32(x + i));
    vst1q_f32(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace hsicnn::kernels

#endif  // aarch64
