#pragma once

// Shared test machinery: the central finite-difference gradient oracle and a
// synthetic labeled hyperspectral scene with Gaussian class spectra.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hsicnn/data.hpp"
#include "hsicnn/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) / scale;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

// Checks analytic gradients for every slot in `x` against central finite
// differences of the scalar objective. Entries where halving h changes the
// difference quotient noticeably sit on a ReLU/max kink and are excluded.
template <class T>
GradCheckResult check_grads(T* x, const T* analytic, std::size_t n,
                            const std::function<double()>& objective,
                            double h = 1e-4) {
  GradCheckResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const T orig = x[i];
    auto fd_at = [&](double step) {
      x[i] = orig + static_cast<T>(step);
      const double fp = objective();
      x[i] = orig - static_cast<T>(step);
      const double fm = objective();
      x[i] = orig;
      return (fp - fm) / (2.0 * step);
    };
    const double fd = fd_at(h);
    const double fd_half = fd_at(h / 2.0);
    if (rel_err(fd, fd_half) > 1e-3) {  // kink between the stencils
      ++r.skipped_kinks;
      continue;
    }
    r.max_rel_err = std::max(r.max_rel_err, rel_err(fd, static_cast<double>(analytic[i])));
    ++r.checked;
  }
  return r;
}

template <class T>
hsicnn::TensorT<T> random_tensor(const std::vector<int>& shape, std::mt19937& rng,
                                 double lo = -1.0, double hi = 1.0) {
  hsicnn::TensorT<T> t(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

struct SynthScene {
  hsicnn::HSICube cube;
  hsicnn::LabelMap labels;
};

// Fully labeled scene whose classes tile the image as rectangular blocks.
// Each class has a smooth random mean spectrum; pixels add Gaussian noise.
inline SynthScene make_synth_scene(int h, int w, int bands, int n_classes,
                                   std::uint32_t seed, double noise = 0.3) {
  SynthScene s;
  s.cube.H = h;
  s.cube.W = w;
  s.cube.B = bands;
  s.cube.values.assign(static_cast<std::size_t>(h) * w * bands, 0.0f);
  s.labels.H = h;
  s.labels.W = w;
  s.labels.C = n_classes;
  s.labels.labels.assign(static_cast<std::size_t>(h) * w, 0);

  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> mu(static_cast<std::size_t>(n_classes),
                                      std::vector<double>(static_cast<std::size_t>(bands)));
  for (auto& m : mu) {
    // sum of a few random sinusoids, so spectra are smooth and distinct
    double a1 = gauss(rng), a2 = gauss(rng), p1 = gauss(rng), p2 = gauss(rng);
    for (int b = 0; b < bands; ++b)
      m[static_cast<std::size_t>(b)] =
          a1 * std::sin(2.0 * 3.14159265358979 * b / bands + p1) +
          a2 * std::cos(4.0 * 3.14159265358979 * b / bands + p2);
  }

  // Class blocks: split rows into ceil(n/2) bands and columns in half.
  const int n_rows = (n_classes + 1) / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int ry = std::min(y * n_rows / h, n_rows - 1);
      int cx = (n_classes > 1 && x * 2 / w >= 1) ? 1 : 0;
      int cls = std::min(ry * 2 + cx, n_classes - 1);
      s.labels.labels[static_cast<std::size_t>(y) * w + x] =
          static_cast<std::uint16_t>(cls + 1);
      for (int b = 0; b < bands; ++b)
        s.cube.at(y, x, b) = static_cast<float>(
            mu[static_cast<std::size_t>(cls)][static_cast<std::size_t>(b)] +
            noise * gauss(rng));
    }
  return s;
}

}  // namespace testutil
