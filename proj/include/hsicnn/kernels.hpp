#pragma once

// Inner-loop arithmetic kernels. Scalar reference implementations are the
// ground truth; vectorized variants (AVX2/NEON) are selected at runtime and
// must agree with the scalar path within floating-point tolerance
// (see tests/test_kernels.cpp).
//
// Every kernel computes each output from a fixed, position-independent
// reduction order, so results are reproducible run-to-run on one machine.

#include <cstddef>

namespace hsicnn::kernels {

// ---- scalar reference kernels ----

float dot_scalar(const float* a, const float* b, std::size_t n);
void axpy_scalar(float alpha, const float* x, float* y, std::size_t n);

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);

// ---- vectorized variants (only compiled on matching targets) ----

#if defined(__x86_64__) || defined(_M_X64)
float dot_avx2(const float* a, const float* b, std::size_t n);
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n);
#endif
#if defined(__aarch64__)
float dot_neon(const float* a, const float* b, std::size_t n);
void axpy_neon(float alpha, const float* x, float* y, std::size_t n);
#endif

// ---- runtime dispatch ----

struct Dispatch {
  const char* name;
  float (*dot_f32)(const float*, const float*, std::size_t);
  void (*axpy_f32)(float, const float*, float*, std::size_t);
};

// Active table, chosen once from CPU features (AVX2 on x86-64, NEON on
// aarch64, scalar otherwise).
const Dispatch& active();

// Pin the scalar table (or restore auto-detection). Test hook.
void force_scalar(bool on);

// ---- generic entry points used by the rest of the library ----

inline float dot(const float* a, const float* b, std::size_t n) {
  return active().dot_f32(a, b, n);
}
inline void axpy(float alpha, const float* x, float* y, std::size_t n) {
  active().axpy_f32(alpha, x, y, n);
}

// Double precision always takes the scalar path; it exists for the
// gradient-check builds where tight tolerances matter more than speed.
inline double dot(const double* a, const double* b, std::size_t n) {
  return dot_scalar(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  axpy_scalar(alpha, x, y, n);
}

}  // namespace hsicnn::kernels
