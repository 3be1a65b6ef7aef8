#pragma once

// The contextual classification network: a multi-scale filter bank over the
// raw cube, a 1x1 mixing layer, residual modules and three 1x1 classifier
// layers. All layers after the bank are spatially 1x1, so the net runs
// either on a single patch (producing one logit vector) or fully
// convolutionally on a whole image (producing a per-pixel logit map).

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsicnn/conv.hpp"
#include "hsicnn/layers.hpp"
#include "hsicnn/tensor.hpp"

namespace hsicnn {

struct NetworkConfig {
  int bands = 0;
  int n_classes = 0;
  int width = 128;
  int n_residual_modules = 2;
  std::vector<int> bank_scales = {1, 3, 5};
  LRNParams lrn;
  double dropout_rate = 0.5;
  // Replaces the first residual module's shortcut with a plain two-layer
  // stack (same convs and ReLUs, no add). Ablation only; never serialized.
  bool plain_first_module = false;

  void validate() const {
    if (bands < 1) throw std::invalid_argument("config: bands must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("config: need >= 2 classes");
    if (width < 1) throw std::invalid_argument("config: width must be >= 1");
    if (n_residual_modules < 0)
      throw std::invalid_argument("config: negative residual module count");
    if (bank_scales.empty())
      throw std::invalid_argument("config: bank_scales must be non-empty");
    for (int s : bank_scales)
      if (s < 1 || s % 2 == 0)
        throw std::invalid_argument("config: bank scales must be odd and >= 1");
    lrn.validate();
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw std::invalid_argument("config: dropout rate must lie in [0,1)");
  }

  int max_scale() const {
    int m = 1;
    for (int s : bank_scales) m = s > m ? s : m;
    return m;
  }
  // Zero padding per side in image mode; also the patch radius.
  int pad() const { return (max_scale() - 1) / 2; }
  int patch_size() const { return max_scale(); }
};

// One convolution's parameters with matching gradient and momentum buffers.
template <class T>
struct ConvParam {
  TensorT<T> w;  // K x kh x kw x C
  std::vector<T> b;
  TensorT<T> gw;
  std::vector<T> gb;
  TensorT<T> vw;
  std::vector<T> vb;
};

struct LayerShape {
  int k, kh, kw, c;
};

// Parameter tensors in fixed serialization order: bank branches (scale
// order as configured), the 1x1 mixing layer, residual module convs, the
// two dropout-guarded classifier layers, the head.
inline std::vector<LayerShape> layer_shapes(const NetworkConfig& cfg) {
  cfg.validate();
  std::vector<LayerShape> shapes;
  const int w = cfg.width;
  for (int s : cfg.bank_scales) shapes.push_back({w, s, s, cfg.bands});
  const int bank_out = static_cast<int>(cfg.bank_scales.size()) * w;
  shapes.push_back({w, 1, 1, bank_out});
  for (int m = 0; m < cfg.n_residual_modules; ++m) {
    shapes.push_back({w, 1, 1, w});
    shapes.push_back({w, 1, 1, w});
  }
  shapes.push_back({w, 1, 1, w});
  shapes.push_back({w, 1, 1, w});
  shapes.push_back({cfg.n_classes, 1, 1, w});
  return shapes;
}

inline std::size_t param_count(const NetworkConfig& cfg) {
  std::size_t total = 0;
  for (const LayerShape& s : layer_shapes(cfg))
    total += static_cast<std::size_t>(s.k) * s.kh * s.kw * s.c + static_cast<std::size_t>(s.k);
  return total;
}

// Layers counting the whole bank as one weighted layer: bank + mixing +
// two convs per residual module + three classifier layers.
inline int weighted_layer_count(const NetworkConfig& cfg) {
  return 1 + 1 + 2 * cfg.n_residual_modules + 3;
}

template <class T>
struct ContextualNetT {
  NetworkConfig cfg;
  std::vector<ConvParam<T>> params;  // layer_shapes() order
  DropoutState<T> drop7{0.5, 0};
  DropoutState<T> drop8{0.5, 0};
  bool train_mode = false;

  ConvParam<T>& bank(int i) { return params[static_cast<std::size_t>(i)]; }
  ConvParam<T>& mixing() { return params[cfg.bank_scales.size()]; }
  ConvParam<T>& module_conv(int m, int which) {
    return params[cfg.bank_scales.size() + 1 + 2 * static_cast<std::size_t>(m) + which];
  }
  ConvParam<T>& fc1() { return params[params.size() - 3]; }
  ConvParam<T>& fc2() { return params[params.size() - 2]; }
  ConvParam<T>& head() { return params[params.size() - 1]; }

  std::size_t parameter_elements() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.w.size() + p.b.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params) {
      std::fill(p.gw.data(), p.gw.data() + p.gw.size(), T(0));
      std::fill(p.gb.begin(), p.gb.end(), T(0));
    }
  }
};

using ContextualNet = ContextualNetT<float>;

// Weights of the bank, the mixing layer and the head are drawn
// N(0, 0.01^2); all other convs N(0, 0.005^2). Biases are 1 except the
// head's, which are 0. Fully determined by the seed.
template <class T>
ContextualNetT<T> build(const NetworkConfig& cfg, std::uint32_t seed) {
  cfg.validate();
  ContextualNetT<T> net;
  net.cfg = cfg;
  const std::vector<LayerShape> shapes = layer_shapes(cfg);
  const std::size_t n_bank = cfg.bank_scales.size();
  const std::size_t head_idx = shapes.size() - 1;
  const std::size_t mixing_idx = n_bank;
  std::mt19937 rng(seed);
  for (std::size_t li = 0; li < shapes.size(); ++li) {
    const LayerShape& s = shapes[li];
    ConvParam<T> p;
    p.w = TensorT<T>({s.k, s.kh, s.kw, s.c});
    const bool wide_init = li < n_bank || li == mixing_idx || li == head_idx;
    std::normal_distribution<double> dist(0.0, wide_init ? 0.01 : 0.005);
    for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] = T(dist(rng));
    p.b.assign(static_cast<std::size_t>(s.k), li == head_idx ? T(0) : T(1));
    p.gw = TensorT<T>(p.w.shape());
    p.gb.assign(p.b.size(), T(0));
    p.vw = TensorT<T>(p.w.shape());
    p.vb.assign(p.b.size(), T(0));
    net.params.push_back(std::move(p));
  }
  net.drop7 = DropoutState<T>(cfg.dropout_rate, rng());
  net.drop8 = DropoutState<T>(cfg.dropout_rate, rng());
  return net;
}

// Intermediate activations recorded by the forward pass for backprop.
template <class T>
struct Workspace {
  TensorT<T> padded;
  std::vector<TensorT<T>> branch_conv;
  std::vector<PoolIndex> branch_pool_idx;
  std::vector<TensorT<T>> branch_out;
  TensorT<T> bank_concat, bank_relu, bank_lrn;
  TensorT<T> mix_conv, mix_relu, mix_lrn;
  std::vector<TensorT<T>> mod_in, mod_conv_a, mod_relu_a, mod_conv_b, mod_sum;
  TensorT<T> trunk_out;
  TensorT<T> fc1_conv, fc1_relu, fc1_drop;
  TensorT<T> fc2_conv, fc2_relu, fc2_drop;
  TensorT<T> logits;
};

// Core forward over an already zero-padded input of spatial size
// (H + 2*pad) x (W + 2*pad); returns the H x W x C logit map. In patch mode
// the "padded input" is the raw (2*pad+1)-sized patch and H = W = 1.
template <class T>
TensorT<T> forward_padded(ContextualNetT<T>& net, const TensorT<T>& padded,
                          Workspace<T>* ws = nullptr) {
  const NetworkConfig& cfg = net.cfg;
  if (padded.rank() != 3 || padded.extent(2) != cfg.bands)
    throw std::invalid_argument("forward: band count does not match config");
  const int p = cfg.pad();
  if (padded.extent(0) < 2 * p + 1 || padded.extent(1) < 2 * p + 1)
    throw std::invalid_argument("forward: input smaller than receptive field");

  Workspace<T> local;
  Workspace<T>& w = ws ? *ws : local;
  if (ws) w.padded = padded;

  // Multi-scale filter bank: scale-s conv, then a (max_scale+1-s) max pool
  // so every branch lands on H x W.
  std::vector<TensorT<T>> branch_outs;
  w.branch_conv.clear();
  w.branch_pool_idx.clear();
  w.branch_out.clear();
  for (std::size_t i = 0; i < cfg.bank_scales.size(); ++i) {
    const int s = cfg.bank_scales[i];
    ConvParam<T>& cp = net.bank(static_cast<int>(i));
    TensorT<T> conv = conv2d_forward(padded, cp.w, cp.b, 0);
    const int pool = cfg.max_scale() + 1 - s;
    if (pool > 1) {
      auto [pooled, idx] = maxpool2d_forward(conv, pool);
      if (ws) {
        w.branch_conv.push_back(std::move(conv));
        w.branch_pool_idx.push_back(std::move(idx));
      }
      branch_outs.push_back(std::move(pooled));
    } else {
      if (ws) {
        w.branch_conv.push_back(conv);
        w.branch_pool_idx.emplace_back();
      }
      branch_outs.push_back(std::move(conv));
    }
  }
  if (ws) w.branch_out = branch_outs;
  std::vector<const TensorT<T>*> parts;
  for (const auto& b : branch_outs) parts.push_back(&b);
  TensorT<T> x = concat_channels(parts);
  if (ws) w.bank_concat = x;
  TensorT<T> a = relu_forward(x);
  if (ws) w.bank_relu = a;
  x = lrn_forward(a, cfg.lrn);
  if (ws) w.bank_lrn = x;

  // 1x1 mixing layer.
  {
    ConvParam<T>& cp = net.mixing();
    TensorT<T> z = conv2d_forward(x, cp.w, cp.b, 0);
    if (ws) w.mix_conv = z;
    a = relu_forward(z);
    if (ws) w.mix_relu = a;
    x = lrn_forward(a, cfg.lrn);
    if (ws) w.mix_lrn = x;
  }

  // Residual modules (or the plain ablation variant for the first one).
  w.mod_in.clear();
  w.mod_conv_a.clear();
  w.mod_relu_a.clear();
  w.mod_conv_b.clear();
  w.mod_sum.clear();
  for (int m = 0; m < cfg.n_residual_modules; ++m) {
    const bool plain = cfg.plain_first_module && m == 0;
    if (ws) w.mod_in.push_back(x);
    ConvParam<T>& ca = net.module_conv(m, 0);
    ConvParam<T>& cb = net.module_conv(m, 1);
    TensorT<T> t = conv2d_forward(x, ca.w, ca.b, 0);
    if (ws) w.mod_conv_a.push_back(t);
    TensorT<T> tr = relu_forward(t);
    if (ws) w.mod_relu_a.push_back(tr);
    TensorT<T> u = conv2d_forward(tr, cb.w, cb.b, 0);
    if (ws) w.mod_conv_b.push_back(u);
    if (!plain)
      for (std::size_t i = 0; i < u.size(); ++i) u[i] += x[i];
    if (ws) w.mod_sum.push_back(u);
    x = relu_forward(u);
  }
  if (ws) w.trunk_out = x;

  // Classifier: two dropout-guarded 1x1 layers, then the logit head.
  {
    ConvParam<T>& cp = net.fc1();
    TensorT<T> z = conv2d_forward(x, cp.w, cp.b, 0);
    if (ws) w.fc1_conv = z;
    a = relu_forward(z);
    if (ws) w.fc1_relu = a;
    x = dropout_forward(a, net.drop7, net.train_mode);
    if (ws) w.fc1_drop = x;
  }
  {
    ConvParam<T>& cp = net.fc2();
    TensorT<T> z = conv2d_forward(x, cp.w, cp.b, 0);
    if (ws) w.fc2_conv = z;
    a = relu_forward(z);
    if (ws) w.fc2_relu = a;
    x = dropout_forward(a, net.drop8, net.train_mode);
    if (ws) w.fc2_drop = x;
  }
  {
    ConvParam<T>& cp = net.head();
    x = conv2d_forward(x, cp.w, cp.b, 0);
  }
  if (ws) w.logits = x;
  return x;
}

// Backprop through a recorded forward pass, accumulating parameter
// gradients in place. grad_logits has the logit map's shape.
template <class T>
void backward(ContextualNetT<T>& net, const Workspace<T>& ws,
              const TensorT<T>& grad_logits) {
  const NetworkConfig& cfg = net.cfg;
  auto acc = [](ConvParam<T>& p, ConvGrads<T>&& g) {
    for (std::size_t i = 0; i < p.gw.size(); ++i) p.gw[i] += g.filters[i];
    for (std::size_t i = 0; i < p.gb.size(); ++i) p.gb[i] += g.bias[i];
    return std::move(g.input);
  };

  // Head and classifier layers.
  TensorT<T> g;
  {
    ConvParam<T>& cp = net.head();
    g = acc(cp, conv2d_backward(ws.fc2_drop, cp.w, grad_logits, 0));
  }
  g = dropout_backward(g, net.drop8, net.train_mode);
  g = relu_backward(g, ws.fc2_conv);
  {
    ConvParam<T>& cp = net.fc2();
    g = acc(cp, conv2d_backward(ws.fc1_drop, cp.w, g, 0));
  }
  g = dropout_backward(g, net.drop7, net.train_mode);
  g = relu_backward(g, ws.fc1_conv);
  {
    ConvParam<T>& cp = net.fc1();
    g = acc(cp, conv2d_backward(ws.trunk_out, cp.w, g, 0));
  }

  // Residual modules, in reverse.
  for (int m = cfg.n_residual_modules - 1; m >= 0; --m) {
    const bool plain = cfg.plain_first_module && m == 0;
    g = relu_backward(g, ws.mod_sum[static_cast<std::size_t>(m)]);
    TensorT<T> g_skip;
    if (!plain) g_skip = g;  // shortcut branch
    ConvParam<T>& cb = net.module_conv(m, 1);
    ConvParam<T>& ca = net.module_conv(m, 0);
    TensorT<T> gb =
        acc(cb, conv2d_backward(ws.mod_relu_a[static_cast<std::size_t>(m)], cb.w, g, 0));
    gb = relu_backward(gb, ws.mod_conv_a[static_cast<std::size_t>(m)]);
    g = acc(ca, conv2d_backward(ws.mod_in[static_cast<std::size_t>(m)], ca.w, gb, 0));
    if (!plain)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += g_skip[i];
  }

  // Mixing layer.
  g = lrn_backward(g, ws.mix_relu, cfg.lrn);
  g = relu_backward(g, ws.mix_conv);
  {
    ConvParam<T>& cp = net.mixing();
    g = acc(cp, conv2d_backward(ws.bank_lrn, cp.w, g, 0));
  }

  // Bank: LRN/ReLU over the concat, then split back into branches.
  g = lrn_backward(g, ws.bank_relu, cfg.lrn);
  g = relu_backward(g, ws.bank_concat);
  std::vector<int> counts(cfg.bank_scales.size(), cfg.width);
  std::vector<TensorT<T>> branch_grads = split_channels(g, counts);
  for (std::size_t i = 0; i < cfg.bank_scales.size(); ++i) {
    const int s = cfg.bank_scales[i];
    const int pool = cfg.max_scale() + 1 - s;
    TensorT<T> gc = pool > 1
                        ? maxpool2d_backward(branch_grads[i], ws.branch_pool_idx[i],
                                             ws.branch_conv[i].shape())
                        : std::move(branch_grads[i]);
    ConvParam<T>& cp = net.bank(static_cast<int>(i));
    acc(cp, conv2d_backward(ws.padded, cp.w, gc, 0));
  }
}

// Patch-mode forward: the patch already carries the zero fill, so it is the
// padded input of a 1 x 1 image. Returns the logit vector at the center.
template <class T>
std::vector<T> forward_patch(ContextualNetT<T>& net, const TensorT<T>& patch,
                             Workspace<T>* ws = nullptr) {
  const int ps = net.cfg.patch_size();
  if (patch.rank() != 3 || patch.extent(0) != ps || patch.extent(1) != ps)
    throw std::invalid_argument("forward_patch: patch must be " + std::to_string(ps) +
                                "x" + std::to_string(ps));
  TensorT<T> logits = forward_padded(net, patch, ws);
  std::vector<T> out(static_cast<std::size_t>(net.cfg.n_classes));
  for (int c = 0; c < net.cfg.n_classes; ++c) out[static_cast<std::size_t>(c)] = logits.at(0, 0, c);
  return out;
}

namespace detail {

// Copy rows [y0-pad, y0+rows+pad) x [x0-pad, x0+cols+pad) of the cube into a
// fresh tensor, zero-filling outside the image. Matches the whole-image
// zero padding exactly, so tiled and untiled runs agree bitwise.
template <class T>
TensorT<T> padded_window(const TensorT<T>& cube, int y0, int x0, int rows, int cols,
                         int pad) {
  const int h = cube.extent(0), w = cube.extent(1), c = cube.extent(2);
  TensorT<T> out({rows + 2 * pad, cols + 2 * pad, c});
  for (int y = 0; y < rows + 2 * pad; ++y) {
    const int sy = y0 - pad + y;
    if (sy < 0 || sy >= h) continue;
    for (int x = 0; x < cols + 2 * pad; ++x) {
      const int sx = x0 - pad + x;
      if (sx < 0 || sx >= w) continue;
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = cube.at(sy, sx, ch);
    }
  }
  return out;
}

}  // namespace detail

// Whole-image fully convolutional forward: zero-pad the cube and produce an
// H x W x C logit map. A tile size bounds peak memory; the 2-pixel halo per
// tile makes the result bit-identical to the untiled run.
template <class T>
TensorT<T> forward_image(ContextualNetT<T>& net, const TensorT<T>& cube, int tile = 0) {
  if (cube.rank() != 3 || cube.extent(2) != net.cfg.bands)
    throw std::invalid_argument("forward_image: band count does not match config");
  const int h = cube.extent(0), w = cube.extent(1);
  const int pad = net.cfg.pad();
  if (tile <= 0) {
    return forward_padded(net, detail::padded_window(cube, 0, 0, h, w, pad));
  }
  TensorT<T> out({h, w, net.cfg.n_classes});
  for (int y0 = 0; y0 < h; y0 += tile)
    for (int x0 = 0; x0 < w; x0 += tile) {
      const int rows = y0 + tile <= h ? tile : h - y0;
      const int cols = x0 + tile <= w ? tile : w - x0;
      TensorT<T> sub = detail::padded_window(cube, y0, x0, rows, cols, pad);
      TensorT<T> logits = forward_padded(net, sub);
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x)
          for (int c = 0; c < net.cfg.n_classes; ++c)
            out.at(y0 + y, x0 + x, c) = logits.at(y, x, c);
    }
  return out;
}

// Per-pixel argmax label map (1-based class ids); ties go to the lowest
// class index.
template <class T>
std::vector<std::uint16_t> predict(ContextualNetT<T>& net, const TensorT<T>& cube,
                                   int tile = 0) {
  const bool was_training = net.train_mode;
  net.train_mode = false;
  TensorT<T> logits = forward_image(net, cube, tile);
  net.train_mode = was_training;
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(cube.extent(0)) *
                                    cube.extent(1));
  std::size_t i = 0;
  for (int y = 0; y < cube.extent(0); ++y)
    for (int x = 0; x < cube.extent(1); ++x) {
      int best = 0;
      for (int c = 1; c < net.cfg.n_classes; ++c)
        if (logits.at(y, x, c) > logits.at(y, x, best)) best = c;
      labels[i++] = static_cast<std::uint16_t>(best + 1);
    }
  return labels;
}

// ---- HSIW weight file ----
// magic "HSIW", u32 version=1, u32 B, C, width, n_res, n_scales, scales...,
// u32 lrn_n, f64 lrn_k, lrn_alpha, lrn_beta, dropout_rate, then per layer
// (fixed order) weights and bias: u32 rank, u32 extents, f32 values, LE.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

struct WeightReader {
  std::ifstream in;
  std::size_t offset = 0;
  std::string path;

  void read_bytes(void* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw std::runtime_error(path + ": truncated at offset " + std::to_string(offset));
    offset += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    read_bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  double f64() {
    unsigned char b[8];
    read_bytes(b, 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
};

}  // namespace detail

inline void save_weights(const ContextualNet& net, const std::string& path) {
  if (net.cfg.plain_first_module)
    throw std::invalid_argument("save_weights: ablation variant is not serializable");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write("HSIW", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.bands));
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.n_classes));
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.width));
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.n_residual_modules));
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.bank_scales.size()));
  for (int s : net.cfg.bank_scales) detail::put_u32(os, static_cast<std::uint32_t>(s));
  detail::put_u32(os, static_cast<std::uint32_t>(net.cfg.lrn.n));
  detail::put_f64(os, net.cfg.lrn.k);
  detail::put_f64(os, net.cfg.lrn.alpha);
  detail::put_f64(os, net.cfg.lrn.beta);
  detail::put_f64(os, net.cfg.dropout_rate);
  auto put_tensor = [&os](const std::vector<int>& shape, const float* data,
                          std::size_t n) {
    detail::put_u32(os, static_cast<std::uint32_t>(shape.size()));
    for (int e : shape) detail::put_u32(os, static_cast<std::uint32_t>(e));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
  };
  for (const auto& p : net.params) {
    put_tensor(p.w.shape(), p.w.data(), p.w.size());
    put_tensor({static_cast<int>(p.b.size())}, p.b.data(), p.b.size());
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ContextualNet load_weights(const std::string& path) {
  detail::WeightReader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  r.read_bytes(magic, 4);
  if (std::memcmp(magic, "HSIW", 4) != 0)
    throw std::runtime_error(path + ": bad magic, not an HSIW weight file");
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error(path + ": unsupported HSIW version " +
                             std::to_string(version));
  NetworkConfig cfg;
  cfg.bands = static_cast<int>(r.u32());
  cfg.n_classes = static_cast<int>(r.u32());
  cfg.width = static_cast<int>(r.u32());
  cfg.n_residual_modules = static_cast<int>(r.u32());
  const std::uint32_t n_scales = r.u32();
  if (n_scales == 0 || n_scales > 16)
    throw std::runtime_error(path + ": implausible scale count");
  cfg.bank_scales.clear();
  for (std::uint32_t i = 0; i < n_scales; ++i)
    cfg.bank_scales.push_back(static_cast<int>(r.u32()));
  cfg.lrn.n = static_cast<int>(r.u32());
  cfg.lrn.k = r.f64();
  cfg.lrn.alpha = r.f64();
  cfg.lrn.beta = r.f64();
  cfg.dropout_rate = r.f64();
  cfg.validate();

  ContextualNet net = build<float>(cfg, 0);
  const std::vector<LayerShape> shapes = layer_shapes(cfg);
  for (std::size_t li = 0; li < shapes.size(); ++li) {
    const LayerShape& s = shapes[li];
    auto expect_tensor = [&r, &path](const std::vector<int>& want, float* dst,
                                     std::size_t n) {
      const std::uint32_t rank = r.u32();
      if (rank != want.size())
        throw std::runtime_error(path + ": tensor rank mismatch vs config at offset " +
                                 std::to_string(r.offset));
      for (int e : want) {
        const std::uint32_t got = r.u32();
        if (got != static_cast<std::uint32_t>(e))
          throw std::runtime_error(path + ": shape table mismatch vs config at offset " +
                                   std::to_string(r.offset));
      }
      r.read_bytes(dst, n * 4);
    };
    ConvParam<float>& p = net.params[li];
    expect_tensor({s.k, s.kh, s.kw, s.c}, p.w.data(), p.w.size());
    expect_tensor({s.k}, p.b.data(), p.b.size());
  }
  return net;
}

}  // namespace hsicnn
