#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "hsicnn/kernels.hpp"

using namespace hsicnn;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar dot matches hand-computed values") {
  const float a[] = {1.0f, 2.0f, 3.0f};
  const float b[] = {4.0f, -5.0f, 6.0f};
  CHECK(kernels::dot_scalar(a, b, 3) == doctest::Approx(12.0f));
  CHECK(kernels::dot_scalar(a, b, 0) == 0.0f);
}

TEST_CASE("scalar axpy accumulates") {
  const float x[] = {1.0f, 2.0f};
  float y[] = {10.0f, 20.0f};
  kernels::axpy_scalar(2.0f, x, y, 2);
  CHECK(y[0] == 12.0f);
  CHECK(y[1] == 24.0f);
}

TEST_CASE("dispatched dot is equivalent to scalar reference") {
  std::mt19937 rng(7);
  INFO("active kernel set: ", kernels::active().name);
  for (std::size_t n : {1u, 7u, 8u, 15u, 16u, 17u, 63u, 220u, 1031u}) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);
    const double ref = kernels::dot_scalar(a.data(), b.data(), n);
    const double got = kernels::active().dot_f32(a.data(), b.data(), n);
    CHECK(std::abs(ref - got) <= 1e-4 * (std::abs(ref) + 1.0));
  }
}

TEST_CASE("dispatched axpy is equivalent to scalar reference") {
  std::mt19937 rng(11);
  for (std::size_t n : {1u, 5u, 8u, 9u, 64u, 515u}) {
    const auto x = random_vec(n, rng);
    auto y_ref = random_vec(n, rng);
    auto y_got = y_ref;
    kernels::axpy_scalar(0.37f, x.data(), y_ref.data(), n);
    kernels::active().axpy_f32(0.37f, x.data(), y_got.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(y_ref[i] - y_got[i]) <= 1e-5f);
  }
}

TEST_CASE("force_scalar pins and restores the dispatch table") {
  kernels::force_scalar(true);
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::force_scalar(false);
#if defined(__x86_64__)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    CHECK(std::string(kernels::active().name) == "avx2");
#endif
}

TEST_CASE("double precision entry points take the scalar path") {
  const double a[] = {1.5, -2.0, 0.25};
  const double b[] = {2.0, 1.0, 4.0};
  CHECK(kernels::dot(a, b, 3) == doctest::Approx(2.0));
}
