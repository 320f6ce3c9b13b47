#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "patcnn/volume.hpp"

namespace patcnn::nn {

// Batch of multi-channel volumes, laid out (n, c, z, y, x) with x fastest.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t batch, std::size_t channels, Dims dims, T fill = T{})
      : batch_(batch), channels_(channels), dims_(dims), data_(batch * channels * dims.count(), fill) {}

  std::size_t batch() const { return batch_; }
  std::size_t channels() const { return channels_; }
  const Dims& dims() const { return dims_; }
  std::size_t spatial() const { return dims_.count(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T* channel(std::size_t n, std::size_t c) { return data_.data() + (n * channels_ + c) * spatial(); }
  const T* channel(std::size_t n, std::size_t c) const {
    return data_.data() + (n * channels_ + c) * spatial();
  }
  T* sample(std::size_t n) { return channel(n, 0); }
  const T* sample(std::size_t n) const { return channel(n, 0); }

  bool same_shape(const Tensor& o) const {
    return batch_ == o.batch_ && channels_ == o.channels_ && dims_ == o.dims_;
  }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o)) throw ShapeError("tensor add: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  std::string shape_string() const {
    return "(" + std::to_string(batch_) + "," + std::to_string(channels_) + "," +
           std::to_string(dims_.nx) + "," + std::to_string(dims_.ny) + "," + std::to_string(dims_.nz) + ")";
  }

 private:
  std::size_t batch_ = 0, channels_ = 0;
  Dims dims_;
  std::vector<T> data_;
};

// Channel-wise concatenation [a, b].
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.batch() != b.batch() || !(a.dims() == b.dims()))
    throw ShapeError("concat_channels: " + a.shape_string() + " vs " + b.shape_string());
  Tensor<T> out(a.batch(), a.channels() + b.channels(), a.dims());
  const std::size_t sa = a.channels() * a.spatial(), sb = b.channels() * b.spatial();
  for (std::size_t n = 0; n < a.batch(); ++n) {
    std::copy_n(a.sample(n), sa, out.sample(n));
    std::copy_n(b.sample(n), sb, out.sample(n) + sa);
  }
  return out;
}

// Inverse of concat_channels for gradients.
template <typename T>
void split_channels(const Tensor<T>& joined, std::size_t first, Tensor<T>& a, Tensor<T>& b) {
  const std::size_t second = joined.channels() - first;
  a = Tensor<T>(joined.batch(), first, joined.dims());
  b = Tensor<T>(joined.batch(), second, joined.dims());
  const std::size_t sa = first * joined.spatial(), sb = second * joined.spatial();
  for (std::size_t n = 0; n < joined.batch(); ++n) {
    std::copy_n(joined.sample(n), sa, a.sample(n));
    std::copy_n(joined.sample(n) + sa, sb, b.sample(n));
  }
}

// Learnable parameter with its gradient accumulator.
template <typename T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::size_t size, T fill = T{})
      : name(std::move(n)), value(size, fill), grad(size, T{}) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }
};

// Non-learnable state that is still checkpointed (batch-norm statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

}  // namespace patcnn::nn
