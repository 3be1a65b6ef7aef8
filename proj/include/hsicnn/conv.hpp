#pragma once

// Convolution, max-pooling and channel-concat primitives on H x W x C maps.
// Stride is 1 everywhere; the network never strides. Convolution lowers each
// filter row to a contiguous dot over kw*C scalars, so the per-output
// reduction order is fixed and position-independent.

#include <stdexcept>
#include <vector>

#include "hsicnn/kernels.hpp"
#include "hsicnn/tensor.hpp"

namespace hsicnn {

template <class T>
TensorT<T> pad_spatial(const TensorT<T>& in, int pad) {
  if (pad < 0) throw std::invalid_argument("pad must be non-negative");
  if (pad == 0) return in;
  const int h = in.extent(0), w = in.extent(1), c = in.extent(2);
  TensorT<T> out({h + 2 * pad, w + 2 * pad, c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(y + pad, x + pad, ch) = in.at(y, x, ch);
  return out;
}

// input H x W x C, filters K x kh x kw x C, bias length K.
// Output (H + 2*pad - kh + 1) x (W + 2*pad - kw + 1) x K.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& filters,
                          const std::vector<T>& bias, int pad) {
  if (input.rank() != 3 || filters.rank() != 4)
    throw std::invalid_argument("conv2d: input must be rank 3, filters rank 4");
  const int k = filters.extent(0), kh = filters.extent(1), kw = filters.extent(2);
  const int c = filters.extent(3);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw std::invalid_argument("conv2d: kernel extents must be odd");
  if (c != input.extent(2))
    throw std::invalid_argument("conv2d: filter channels do not match input");
  if (static_cast<int>(bias.size()) != k)
    throw std::invalid_argument("conv2d: bias length does not match filter count");
  const int oh = input.extent(0) + 2 * pad - kh + 1;
  const int ow = input.extent(1) + 2 * pad - kw + 1;
  if (oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d: window larger than padded input");

  const TensorT<T> padded = pad_spatial(input, pad);
  TensorT<T> out({oh, ow, k});
  const std::size_t seg = static_cast<std::size_t>(kw) * c;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int f = 0; f < k; ++f) {
        T acc = bias[static_cast<std::size_t>(f)];
        for (int dy = 0; dy < kh; ++dy)
          acc += kernels::dot(&padded.at(y + dy, x, 0), &filters.at4(f, dy, 0, 0), seg);
        out.at(y, x, f) = acc;
      }
  out.check_finite("conv2d_forward output");
  return out;
}

template <class T>
struct ConvGrads {
  TensorT<T> input;
  TensorT<T> filters;
  std::vector<T> bias;
};

template <class T>
ConvGrads<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& filters,
                             const TensorT<T>& grad_out, int pad) {
  const int k = filters.extent(0), kh = filters.extent(1), kw = filters.extent(2);
  const int c = filters.extent(3);
  const int oh = input.extent(0) + 2 * pad - kh + 1;
  const int ow = input.extent(1) + 2 * pad - kw + 1;
  if (grad_out.rank() != 3 || grad_out.extent(0) != oh || grad_out.extent(1) != ow ||
      grad_out.extent(2) != k)
    throw std::invalid_argument("conv2d_backward: grad_out shape mismatch");
  if (c != input.extent(2))
    throw std::invalid_argument("conv2d_backward: filter channels do not match input");

  const TensorT<T> padded = pad_spatial(input, pad);
  TensorT<T> grad_padded(padded.shape());
  ConvGrads<T> g;
  g.filters = TensorT<T>(filters.shape());
  g.bias.assign(static_cast<std::size_t>(k), T(0));

  const std::size_t seg = static_cast<std::size_t>(kw) * c;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int f = 0; f < k; ++f) {
        const T go = grad_out.at(y, x, f);
        if (go == T(0)) continue;
        g.bias[static_cast<std::size_t>(f)] += go;
        for (int dy = 0; dy < kh; ++dy) {
          kernels::axpy(go, &padded.at(y + dy, x, 0), &g.filters.at4(f, dy, 0, 0), seg);
          kernels::axpy(go, &filters.at4(f, dy, 0, 0), &grad_padded.at(y + dy, x, 0), seg);
        }
      }

  if (pad == 0) {
    g.input = std::move(grad_padded);
  } else {
    g.input = TensorT<T>(input.shape());
    for (int y = 0; y < input.extent(0); ++y)
      for (int x = 0; x < input.extent(1); ++x)
        for (int ch = 0; ch < c; ++ch)
          g.input.at(y, x, ch) = grad_padded.at(y + pad, x + pad, ch);
  }
  return g;
}

// Max pooling with a w x w window at stride 1 and no implicit padding.
// Ties break to the first cell of the window in row-major scan order.
template <class T>
std::pair<TensorT<T>, PoolIndex> maxpool2d_forward(const TensorT<T>& input, int window) {
  const int h = input.extent(0), w = input.extent(1), c = input.extent(2);
  if (window < 1 || window > h || window > w)
    throw std::invalid_argument("maxpool2d: window exceeds input");
  const int oh = h - window + 1, ow = w - window + 1;
  TensorT<T> out({oh, ow, c});
  PoolIndex idx;
  idx.shape = {oh, ow, c};
  idx.argmax.resize(out.size());
  std::size_t o = 0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ch = 0; ch < c; ++ch) {
        T best = input.at(y, x, ch);
        std::size_t best_at =
            (static_cast<std::size_t>(y) * w + x) * c + static_cast<std::size_t>(ch);
        for (int dy = 0; dy < window; ++dy)
          for (int dx = 0; dx < window; ++dx) {
            const T v = input.at(y + dy, x + dx, ch);
            if (v > best) {
              best = v;
              best_at = (static_cast<std::size_t>(y + dy) * w + (x + dx)) * c +
                        static_cast<std::size_t>(ch);
            }
          }
        out.at(y, x, ch) = best;
        idx.argmax[o++] = best_at;
      }
  return {std::move(out), std::move(idx)};
}

template <class T>
TensorT<T> maxpool2d_backward(const TensorT<T>& grad_out, const PoolIndex& idx,
                              const std::vector<int>& input_shape) {
  if (grad_out.shape() != idx.shape)
    throw std::invalid_argument("maxpool2d_backward: grad_out does not match index");
  TensorT<T> grad_in(input_shape);
  for (std::size_t i = 0; i < idx.argmax.size(); ++i) {
    if (idx.argmax[i] >= grad_in.size())
      throw std::invalid_argument("maxpool2d_backward: index outside input shape");
    grad_in[idx.argmax[i]] += grad_out[i];
  }
  return grad_in;
}

// Stack channels of equally-sized maps in argument order.
template <class T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no parts");
  const int h = parts[0]->extent(0), w = parts[0]->extent(1);
  int total_c = 0;
  for (const auto* p : parts) {
    if (p->extent(0) != h || p->extent(1) != w)
      throw std::invalid_argument("concat_channels: spatial extents differ");
    total_c += p->extent(2);
  }
  TensorT<T> out({h, w, total_c});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int base = 0;
      for (const auto* p : parts) {
        const int c = p->extent(2);
        for (int ch = 0; ch < c; ++ch) out.at(y, x, base + ch) = p->at(y, x, ch);
        base += c;
      }
    }
  return out;
}

// Inverse of concat_channels for the backward pass.
template <class T>
std::vector<TensorT<T>> split_channels(const TensorT<T>& whole,
                                       const std::vector<int>& channel_counts) {
  int total = 0;
  for (int c : channel_counts) total += c;
  if (total != whole.extent(2))
    throw std::invalid_argument("split_channels: channel counts do not sum to input");
  std::vector<TensorT<T>> parts;
  parts.reserve(channel_counts.size());
  int base = 0;
  for (int c : channel_counts) {
    TensorT<T> p({whole.extent(0), whole.extent(1), c});
    for (int y = 0; y < whole.extent(0); ++y)
      for (int x = 0; x < whole.extent(1); ++x)
        for (int ch = 0; ch < c; ++ch) p.at(y, x, ch) = whole.at(y, x, base + ch);
    parts.push_back(std::move(p));
    base += c;
  }
  return parts;
}

}  // namespace hsicnn
