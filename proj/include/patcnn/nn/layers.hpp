#pragma once

#include <cmath>
#include <vector>

#include "patcnn/nn/tensor.hpp"

namespace patcnn::nn {

// Batch normalisation over (batch, x, y, z) per channel. Training mode uses
// batch statistics and updates the running estimates; evaluation mode uses
// the running estimates and is a fixed affine map.
template <typename T>
class BatchNorm3d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm3d() = default;
  BatchNorm3d(const std::string& name, std::size_t channels)
      : channels_(channels),
        gamma_(name + ".gamma", channels, T(1)),
        beta_(name + ".beta", channels, T(0)),
        running_mean_{name + ".running_mean", std::vector<T>(channels, T(0))},
        running_var_{name + ".running_var", std::vector<T>(channels, T(1))} {}

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    if (x.channels() != channels_) throw ShapeError(gamma_.name + ": channel mismatch " + x.shape_string());
    Tensor<T> y(x.batch(), channels_, x.dims());
    const std::size_t s = x.spatial();
    const double m = static_cast<double>(x.batch() * s);

    if (training) {
      xhat_ = Tensor<T>(x.batch(), channels_, x.dims());
      inv_std_.assign(channels_, 0.0);
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      double mean, var;
      if (training) {
        double sum = 0;
        for (std::size_t n = 0; n < x.batch(); ++n) {
          const T* p = x.channel(n, c);
          for (std::size_t i = 0; i < s; ++i) sum += p[i];
        }
        mean = sum / m;
        double sq = 0;
        for (std::size_t n = 0; n < x.batch(); ++n) {
          const T* p = x.channel(n, c);
          for (std::size_t i = 0; i < s; ++i) {
            const double d = p[i] - mean;
            sq += d * d;
          }
        }
        var = sq / m;
        const double unbiased = m > 1 ? sq / (m - 1) : var;
        running_mean_.value[c] = static_cast<T>((1 - kMomentum) * running_mean_.value[c] + kMomentum * mean);
        running_var_.value[c] = static_cast<T>((1 - kMomentum) * running_var_.value[c] + kMomentum * unbiased);
      } else {
        mean = running_mean_.value[c];
        var = running_var_.value[c];
      }
      const double inv = 1.0 / std::sqrt(var + kEps);
      const double g = gamma_.value[c], b = beta_.value[c];
      for (std::size_t n = 0; n < x.batch(); ++n) {
        const T* p = x.channel(n, c);
        T* q = y.channel(n, c);
        T* h = training ? xhat_.channel(n, c) : nullptr;
        for (std::size_t i = 0; i < s; ++i) {
          const double xh = (p[i] - mean) * inv;
          if (h) h[i] = static_cast<T>(xh);
          q[i] = static_cast<T>(g * xh + b);
        }
      }
      if (training) inv_std_[c] = inv;
    }
    return y;
  }

  // Training-mode backward only.
  Tensor<T> backward(const Tensor<T>& dy) {
    if (xhat_.empty()) throw Error(gamma_.name + ": backward without a training-mode forward pass");
    Tensor<T> dx(dy.batch(), channels_, dy.dims());
    const std::size_t s = dy.spatial();
    const double m = static_cast<double>(dy.batch() * s);
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_dy = 0, sum_dy_xh = 0;
      for (std::size_t n = 0; n < dy.batch(); ++n) {
        const T* g = dy.channel(n, c);
        const T* h = xhat_.channel(n, c);
        for (std::size_t i = 0; i < s; ++i) {
          sum_dy += g[i];
          sum_dy_xh += static_cast<double>(g[i]) * h[i];
        }
      }
      gamma_.grad[c] += static_cast<T>(sum_dy_xh);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double k = gamma_.value[c] * inv_std_[c] / m;
      for (std::size_t n = 0; n < dy.batch(); ++n) {
        const T* g = dy.channel(n, c);
        const T* h = xhat_.channel(n, c);
        T* o = dx.channel(n, c);
        for (std::size_t i = 0; i < s; ++i) o[i] = static_cast<T>(k * (m * g[i] - sum_dy - h[i] * sum_dy_xh));
      }
    }
    xhat_ = Tensor<T>();
    return dx;
  }

  template <typename F>
  void visit_params(F&& f) {
    f(gamma_);
    f(beta_);
  }
  template <typename F>
  void visit_buffers(F&& f) {
    f(running_mean_);
    f(running_var_);
  }

 private:
  std::size_t channels_ = 0;
  Param<T> gamma_, beta_;
  Buffer<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
};

// PReLU with one learnable slope per channel, or plain ReLU when
// parametric is false (slope fixed at zero, no parameters).
template <typename T>
class Activation {
 public:
  Activation() = default;
  Activation(const std::string& name, std::size_t channels, bool parametric)
      : parametric_(parametric), channels_(channels) {
    if (parametric) slope_ = Param<T>(name + ".slope", channels, T(0.25));
  }

  Tensor<T> forward(const Tensor<T>& x, bool cache) {
    Tensor<T> y(x.batch(), x.channels(), x.dims());
    const std::size_t s = x.spatial();
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t c = 0; c < x.channels(); ++c) {
        const T a = parametric_ ? slope_.value[c] : T(0);
        const T* p = x.channel(n, c);
        T* q = y.channel(n, c);
        for (std::size_t i = 0; i < s; ++i) q[i] = p[i] > T(0) ? p[i] : a * p[i];
      }
    if (cache) input_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    if (input_.empty()) throw Error("activation: backward without a cached forward pass");
    Tensor<T> dx(dy.batch(), dy.channels(), dy.dims());
    const std::size_t s = dy.spatial();
    for (std::size_t c = 0; c < channels_; ++c) {
      const T a = parametric_ ? slope_.value[c] : T(0);
      double da = 0;
      for (std::size_t n = 0; n < dy.batch(); ++n) {
        const T* g = dy.channel(n, c);
        const T* p = input_.channel(n, c);
        T* o = dx.channel(n, c);
        for (std::size_t i = 0; i < s; ++i) {
          if (p[i] > T(0)) {
            o[i] = g[i];
          } else {
            o[i] = a * g[i];
            da += static_cast<double>(g[i]) * p[i];
          }
        }
      }
      if (parametric_) slope_.grad[c] += static_cast<T>(da);
    }
    input_ = Tensor<T>();
    return dx;
  }

  template <typename F>
  void visit_params(F&& f) {
    if (parametric_) f(slope_);
  }

 private:
  bool parametric_ = true;
  std::size_t channels_ = 0;
  Param<T> slope_;
  Tensor<T> input_;
};

}  // namespace patcnn::nn
