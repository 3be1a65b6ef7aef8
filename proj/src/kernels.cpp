#include "hsicnn/kernels.hpp"

namespace hsicnn::kernels {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

namespace {

const Dispatch kScalar{"scalar", &dot_scalar, &axpy_scalar};

#if defined(__x86_64__) || defined(_M_X64)
const Dispatch kAvx2{"avx2", &dot_avx2, &axpy_avx2};
#endif
#if defined(__aarch64__)
const Dispatch kNeon{"neon", &dot_neon, &axpy_neon};
#endif

const Dispatch* detect() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return &kAvx2;
#endif
#if defined(__aarch64__)
  return &kNeon;
#endif
  return &kScalar;
}

const Dispatch* g_active = detect();

}  // namespace

const Dispatch& active() { return *g_active; }

void force_scalar(bool on) { g_active = on ? &kScalar : detect(); }

}  // namespace hsicnn::kernels
