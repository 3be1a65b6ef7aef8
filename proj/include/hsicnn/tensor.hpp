#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsicnn {

// Dense row-major real array of rank 1..4. Feature maps are H x W x C,
// filter sets are K x kh x kw x C. float carries training/inference;
// double is used by the gradient-check builds.
template <class T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4)
      throw std::invalid_argument("tensor rank must be 1..4");
    std::size_t n = 1;
    for (int e : shape_) {
      if (e < 1) throw std::invalid_argument("tensor extent must be >= 1");
      n *= static_cast<std::size_t>(e);
    }
    data_.assign(n, T(0));
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 3-d access: (row, col, channel) on an H x W x C map.
  T& at(int y, int x, int c) {
    return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }
  const T& at(int y, int x, int c) const {
    return data_[(static_cast<std::size_t>(y) * shape_[1] + x) * shape_[2] + c];
  }

  // 4-d access: (kernel, ky, kx, channel) on a K x kh x kw x C filter set.
  T& at4(int k, int y, int x, int c) {
    return data_[((static_cast<std::size_t>(k) * shape_[1] + y) * shape_[2] + x) *
                     shape_[3] +
                 c];
  }
  const T& at4(int k, int y, int x, int c) const {
    return data_[((static_cast<std::size_t>(k) * shape_[1] + y) * shape_[2] + x) *
                     shape_[3] +
                 c];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  void check_finite(const char* what) const {
    for (const T& v : data_)
      if (!std::isfinite(v))
        throw std::runtime_error(std::string("non-finite value in ") + what);
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

// For each output position and channel of a max pooling, the flat index into
// the pool's input tensor that produced the max.
struct PoolIndex {
  std::vector<int> shape;  // output shape H x W x C
  std::vector<std::size_t> argmax;
};

}  // namespace hsicnn
