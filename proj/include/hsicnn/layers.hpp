#pragma once

// Layer-level operations: activations, local response normalization across
// channels, inverted dropout and the softmax cross-entropy head.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "hsicnn/conv.hpp"
#include "hsicnn/tensor.hpp"

namespace hsicnn {

template <class T>
TensorT<T> relu_forward(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

// Subgradient at exactly 0 is 0.
template <class T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& x) {
  if (!grad_out.same_shape(x))
    throw std::invalid_argument("relu_backward: shape mismatch");
  TensorT<T> grad_in(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    grad_in[i] = x[i] > T(0) ? grad_out[i] : T(0);
  return grad_in;
}

struct LRNParams {
  int n = 5;           // channel window, odd
  double k = 1.0;      // additive constant
  double alpha = 1e-4; // scale
  double beta = 0.75;  // exponent

  void validate() const {
    if (n < 1 || n % 2 == 0) throw std::invalid_argument("LRN: n must be odd and >= 1");
    if (k < 0 || alpha < 0 || beta <= 0)
      throw std::invalid_argument("LRN: require k >= 0, alpha >= 0, beta > 0");
  }
};

// a*_i = a_i / (k + alpha * sum_{j in window(i)} a_j^2)^beta, the channel
// window clipped at tensor edges (out-of-range terms contribute 0).
template <class T>
TensorT<T> lrn_forward(const TensorT<T>& x, const LRNParams& p) {
  p.validate();
  const int h = x.extent(0), w = x.extent(1), c = x.extent(2);
  const int half = p.n / 2;
  TensorT<T> out(x.shape());
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int i = 0; i < c; ++i) {
        T sum = T(0);
        const int jlo = i - half > 0 ? i - half : 0;
        const int jhi = i + half < c - 1 ? i + half : c - 1;
        for (int j = jlo; j <= jhi; ++j) {
          const T a = x.at(y, xx, j);
          sum += a * a;
        }
        const T denom = std::pow(T(p.k) + T(p.alpha) * sum, T(p.beta));
        out.at(y, xx, i) = x.at(y, xx, i) / denom;
      }
  out.check_finite("lrn_forward output");
  return out;
}

// d y_i / d x_l = [i==l] d_i^-beta - 2 alpha beta x_i x_l d_i^(-beta-1) for
// l in window(i), with d_i the normalization denominator base.
template <class T>
TensorT<T> lrn_backward(const TensorT<T>& grad_out, const TensorT<T>& x,
                        const LRNParams& p) {
  p.validate();
  if (!grad_out.same_shape(x))
    throw std::invalid_argument("lrn_backward: shape mismatch");
  const int h = x.extent(0), w = x.extent(1), c = x.extent(2);
  const int half = p.n / 2;
  TensorT<T> grad_in(x.shape());
  std::vector<T> base(static_cast<std::size_t>(c));
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      for (int i = 0; i < c; ++i) {
        T sum = T(0);
        const int jlo = i - half > 0 ? i - half : 0;
        const int jhi = i + half < c - 1 ? i + half : c - 1;
        for (int j = jlo; j <= jhi; ++j) {
          const T a = x.at(y, xx, j);
          sum += a * a;
        }
        base[static_cast<std::size_t>(i)] = T(p.k) + T(p.alpha) * sum;
      }
      for (int l = 0; l < c; ++l) {
        T acc = grad_out.at(y, xx, l) * std::pow(base[static_cast<std::size_t>(l)], T(-p.beta));
        const int ilo = l - half > 0 ? l - half : 0;
        const int ihi = l + half < c - 1 ? l + half : c - 1;
        for (int i = ilo; i <= ihi; ++i) {
          const T d = base[static_cast<std::size_t>(i)];
          acc -= T(2) * T(p.alpha) * T(p.beta) * x.at(y, xx, l) * x.at(y, xx, i) *
                 grad_out.at(y, xx, i) * std::pow(d, T(-p.beta) - T(1));
        }
        grad_in.at(y, xx, l) = acc;
      }
    }
  return grad_in;
}

// Inverted dropout: surviving entries scale by 1/(1-rate) at train time so
// the eval-mode forward is the identity.
template <class T>
struct DropoutState {
  double rate = 0.5;
  std::mt19937 rng;
  std::vector<T> mask;  // entries in {0, 1/(1-rate)}

  explicit DropoutState(double r = 0.5, std::uint32_t seed = 0) : rate(r), rng(seed) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw std::invalid_argument("dropout rate must lie in [0,1)");
  }
};

template <class T>
TensorT<T> dropout_forward(const TensorT<T>& x, DropoutState<T>& state, bool train) {
  if (!train) return x;
  const T keep_scale = T(1.0 / (1.0 - state.rate));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  state.mask.resize(x.size());
  TensorT<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = u(state.rng) < state.rate ? T(0) : keep_scale;
    state.mask[i] = m;
    out[i] = x[i] * m;
  }
  return out;
}

template <class T>
TensorT<T> dropout_backward(const TensorT<T>& grad_out, const DropoutState<T>& state,
                            bool train) {
  if (!train) return grad_out;
  if (state.mask.size() != grad_out.size())
    throw std::invalid_argument("dropout_backward: no matching forward mask");
  TensorT<T> grad_in(grad_out.shape());
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    grad_in[i] = grad_out[i] * state.mask[i];
  return grad_in;
}

template <class T>
struct SoftmaxResult {
  T loss;
  std::vector<T> probs;
  std::vector<T> grad_logits;  // P - onehot(label)
};

// Numerically stable softmax cross-entropy over one logit vector.
template <class T>
SoftmaxResult<T> softmax_xent(const std::vector<T>& logits, int label) {
  const int k = static_cast<int>(logits.size());
  if (k < 2) throw std::invalid_argument("softmax_xent: need at least 2 classes");
  if (label < 0 || label >= k)
    throw std::invalid_argument("softmax_xent: label out of range");
  T mx = logits[0];
  for (const T& v : logits) mx = v > mx ? v : mx;
  T z = T(0);
  SoftmaxResult<T> r;
  r.probs.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    r.probs[j] = std::exp(logits[j] - mx);
    z += r.probs[j];
  }
  r.grad_logits.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    r.probs[j] /= z;
    r.grad_logits[j] = r.probs[j];
  }
  r.grad_logits[static_cast<std::size_t>(label)] -= T(1);
  // -log P(label) without re-exponentiating
  r.loss = -(logits[static_cast<std::size_t>(label)] - mx - std::log(z));
  return r;
}

}  // namespace hsicnn
