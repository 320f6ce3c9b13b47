#pragma once

#include <Eigen/Core>

#include <cmath>
#include <random>
#include <vector>

#include "patcnn/nn/tensor.hpp"

namespace patcnn::nn {

// How a destination voxel finds its source voxel along one axis for tap k:
//   Strided: src = dst * stride - pad + k           (ordinary convolution)
//   Dilated: src = (dst + pad - k) / stride, if exact (transposed convolution)
// Each convolution uses one mode forward and the other for the input
// gradient, so both directions are plain gathers followed by a GEMM.
enum class Gather { Strided, Dilated };

namespace detail {

// src index per (tap, dst) or -1 when the tap falls outside the source.
inline std::vector<int> axis_table(std::size_t n_src, std::size_t n_dst, int kernel, int stride, int pad,
                                   Gather mode) {
  std::vector<int> t(static_cast<std::size_t>(kernel) * n_dst, -1);
  for (int k = 0; k < kernel; ++k)
    for (std::size_t o = 0; o < n_dst; ++o) {
      long src;
      if (mode == Gather::Strided) {
        src = static_cast<long>(o) * stride - pad + k;
      } else {
        const long num = static_cast<long>(o) + pad - k;
        if (num < 0 || num % stride != 0) continue;
        src = num / stride;
      }
      if (src >= 0 && src < static_cast<long>(n_src)) t[k * n_dst + o] = static_cast<int>(src);
    }
  return t;
}

struct GatherPlan {
  Dims src, dst;
  int kernel = 3;
  std::vector<int> tx, ty, tz;
  std::size_t rows_per_block = 1;  // (y,z) rows of dst per column block

  GatherPlan(Dims s, Dims d, int k, int stride, int pad, Gather mode, std::size_t src_channels)
      : src(s), dst(d), kernel(k) {
    tx = axis_table(s.nx, d.nx, k, stride, pad, mode);
    ty = axis_table(s.ny, d.ny, k, stride, pad, mode);
    tz = axis_table(s.nz, d.nz, k, stride, pad, mode);
    // Bound the column buffer to ~4M elements.
    const std::size_t taps = src_channels * k * k * k;
    const std::size_t budget = std::size_t{1} << 22;
    rows_per_block = std::max<std::size_t>(1, budget / std::max<std::size_t>(1, taps * d.nx));
  }

  std::size_t taps() const { return static_cast<std::size_t>(kernel) * kernel * kernel; }
  std::size_t total_rows() const { return dst.ny * dst.nz; }

  // Fills col (rows = channels * taps, cols = (row_end - row_begin) * dst.nx).
  template <typename T>
  void im2col(const T* src_data, std::size_t channels, std::size_t row_begin, std::size_t row_end,
              T* col) const {
    const std::size_t cols = (row_end - row_begin) * dst.nx;
    const std::size_t src_spatial = src.count();
    const int k = kernel;
    for (std::size_t c = 0; c < channels; ++c) {
      const T* in = src_data + c * src_spatial;
      for (int kz = 0; kz < k; ++kz)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const std::size_t row = ((c * k + kz) * k + ky) * k + kx;
            T* out = col + row * cols;
            const int* xt = tx.data() + kx * dst.nx;
            for (std::size_t r = row_begin; r < row_end; ++r) {
              const std::size_t oy = r % dst.ny, oz = r / dst.ny;
              const int iy = ty[ky * dst.ny + oy], iz = tz[kz * dst.nz + oz];
              T* o = out + (r - row_begin) * dst.nx;
              if (iy < 0 || iz < 0) {
                std::fill_n(o, dst.nx, T{});
                continue;
              }
              const T* line = in + (static_cast<std::size_t>(iz) * src.ny + iy) * src.nx;
              for (std::size_t ox = 0; ox < dst.nx; ++ox) {
                const int ix = xt[ox];
                o[ox] = ix >= 0 ? line[ix] : T{};
              }
            }
          }
    }
  }
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// dst[n] (out_ch x dst) = weights (out_ch x in_ch*taps) * im2col(src[n]).
template <typename T>
void gather_gemm(const Tensor<T>& src, const GatherPlan& plan, const T* weights, std::size_t out_ch,
                 Tensor<T>& dst, std::vector<T>& col) {
  const std::size_t k_dim = src.channels() * plan.taps();
  const std::size_t dst_spatial = plan.dst.count();
  const Eigen::Map<const RowMat<T>> w(weights, out_ch, k_dim);
  for (std::size_t n = 0; n < src.batch(); ++n) {
    for (std::size_t r0 = 0; r0 < plan.total_rows(); r0 += plan.rows_per_block) {
      const std::size_t r1 = std::min(plan.total_rows(), r0 + plan.rows_per_block);
      const std::size_t cols = (r1 - r0) * plan.dst.nx;
      col.resize(k_dim * cols);
      plan.im2col(src.sample(n), src.channels(), r0, r1, col.data());
      const Eigen::Map<const RowMat<T>> c(col.data(), k_dim, cols);
      Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>> y(dst.sample(n) + r0 * plan.dst.nx, out_ch, cols,
                                                     Eigen::OuterStride<>(dst_spatial));
      y.noalias() = w * c;
    }
  }
}

// grad_w (out_ch x in_ch*taps) += sum_n grad_dst[n] * im2col(src[n])^T.
template <typename T>
void gather_weight_grad(const Tensor<T>& src, const GatherPlan& plan, const Tensor<T>& grad_dst,
                        T* grad_weights, std::vector<T>& col) {
  const std::size_t out_ch = grad_dst.channels();
  const std::size_t k_dim = src.channels() * plan.taps();
  const std::size_t dst_spatial = plan.dst.count();
  Eigen::Map<RowMat<T>> gw(grad_weights, out_ch, k_dim);
  for (std::size_t n = 0; n < src.batch(); ++n) {
    for (std::size_t r0 = 0; r0 < plan.total_rows(); r0 += plan.rows_per_block) {
      const std::size_t r1 = std::min(plan.total_rows(), r0 + plan.rows_per_block);
      const std::size_t cols = (r1 - r0) * plan.dst.nx;
      col.resize(k_dim * cols);
      plan.im2col(src.sample(n), src.channels(), r0, r1, col.data());
      const Eigen::Map<const RowMat<T>> c(col.data(), k_dim, cols);
      const Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> g(
          grad_dst.sample(n) + r0 * plan.dst.nx, out_ch, cols, Eigen::OuterStride<>(dst_spatial));
      gw.noalias() += g * c.transpose();
    }
  }
}

}  // namespace detail

// 3D convolution (transposed = false) or transposed convolution
// (transposed = true) with cubic kernel, padding (kernel - 1) / 2 and an
// integer stride. A transposed convolution with stride s maps n -> s * n
// voxels per axis; an ordinary one maps n -> (n - 1) / s + 1.
//
// Weights are stored (out_ch, in_ch, kz, ky, kx) for both kinds.
template <typename T>
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(std::string name, std::size_t in_ch, std::size_t out_ch, int kernel, int stride, bool transposed,
         bool bias)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        kernel_(kernel),
        stride_(stride),
        transposed_(transposed),
        weight_(name + ".weight", out_ch * in_ch * kernel * kernel * kernel),
        has_bias_(bias) {
    if (bias) bias_ = Param<T>(name + ".bias", out_ch);
  }

  Dims output_dims(const Dims& in) const {
    auto f = [&](std::size_t n) {
      if (transposed_) return n * stride_;
      const long pad = (kernel_ - 1) / 2;
      return static_cast<std::size_t>((static_cast<long>(n) + 2 * pad - kernel_) / stride_ + 1);
    };
    return {f(in.nx), f(in.ny), f(in.nz)};
  }

  template <typename Rng>
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_ * kernel_ * kernel_ * kernel_));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : weight_.value) w = static_cast<T>(u(rng));
    if (has_bias_)
      for (auto& b : bias_.value) b = static_cast<T>(u(rng));
  }

  // With cache = false nothing is kept for backward (inference).
  Tensor<T> forward(const Tensor<T>& x, bool cache = true) {
    if (x.channels() != in_ch_)
      throw ShapeError(weight_.name + ": expected " + std::to_string(in_ch_) + " input channels, got " +
                       x.shape_string());
    if (cache) input_ = x;
    const Dims out_dims = output_dims(x.dims());
    const detail::GatherPlan plan(x.dims(), out_dims, kernel_, stride_, pad(), forward_mode(), in_ch_);
    Tensor<T> y(x.batch(), out_ch_, out_dims);
    detail::gather_gemm(x, plan, weight_.value.data(), out_ch_, y, col_);
    if (has_bias_) {
      for (std::size_t n = 0; n < y.batch(); ++n)
        for (std::size_t c = 0; c < out_ch_; ++c) {
          T* p = y.channel(n, c);
          const T b = bias_.value[c];
          for (std::size_t i = 0; i < y.spatial(); ++i) p[i] += b;
        }
    }
    return y;
  }

  // Accumulates parameter gradients and returns dLoss/dinput.
  Tensor<T> backward(const Tensor<T>& dy) {
    if (input_.empty()) throw Error(weight_.name + ": backward without a cached forward pass");
    const Dims in_dims = input_.dims();
    const Dims out_dims = dy.dims();
    const detail::GatherPlan fwd(in_dims, out_dims, kernel_, stride_, pad(), forward_mode(), in_ch_);
    detail::gather_weight_grad(input_, fwd, dy, weight_.grad.data(), col_);

    if (has_bias_) {
      for (std::size_t n = 0; n < dy.batch(); ++n)
        for (std::size_t c = 0; c < out_ch_; ++c) {
          const T* p = dy.channel(n, c);
          double s = 0;
          for (std::size_t i = 0; i < dy.spatial(); ++i) s += p[i];
          bias_.grad[c] += static_cast<T>(s);
        }
    }

    // Input gradient: gather from dy with the opposite mode, weights
    // rearranged to (in_ch, out_ch * taps).
    const std::size_t taps = static_cast<std::size_t>(kernel_) * kernel_ * kernel_;
    std::vector<T> wt(in_ch_ * out_ch_ * taps);
    for (std::size_t co = 0; co < out_ch_; ++co)
      for (std::size_t ci = 0; ci < in_ch_; ++ci)
        for (std::size_t t = 0; t < taps; ++t)
          wt[(ci * out_ch_ + co) * taps + t] = weight_.value[(co * in_ch_ + ci) * taps + t];
    const detail::GatherPlan bwd(out_dims, in_dims, kernel_, stride_, pad(), backward_mode(), out_ch_);
    Tensor<T> dx(dy.batch(), in_ch_, in_dims);
    detail::gather_gemm(dy, bwd, wt.data(), in_ch_, dx, col_);
    input_ = Tensor<T>();
    return dx;
  }

  template <typename F>
  void visit_params(F&& f) {
    f(weight_);
    if (has_bias_) f(bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int pad() const { return (kernel_ - 1) / 2; }
  Gather forward_mode() const { return transposed_ ? Gather::Dilated : Gather::Strided; }
  Gather backward_mode() const { return transposed_ ? Gather::Strided : Gather::Dilated; }

  std::size_t in_ch_ = 0, out_ch_ = 0;
  int kernel_ = 3, stride_ = 1;
  bool transposed_ = false;
  Param<T> weight_;
  bool has_bias_ = false;
  Param<T> bias_;
  Tensor<T> input_;
  std::vector<T> col_;
};

}  // namespace patcnn::nn
