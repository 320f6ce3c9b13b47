#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "patcnn/nn/conv.hpp"
#include "patcnn/nn/layers.hpp"
#include "patcnn/nn/tensor.hpp"

namespace patcnn {

// Architecture hyperparameters. Kernels are 3x3x3 and each level halves
// the grid, so inputs must be divisible by 16 along every axis.
struct ModelConfig {
  static constexpr int kKernel = 3;
  static constexpr int kDownsample = 2;
  static constexpr std::size_t kLevels = 4;
  static constexpr std::size_t kInputMultiple = 16;

  std::array<std::size_t, kLevels> channels{16, 32, 64, 128};
  std::size_t bottleneck = 256;
  // true: residual units with PReLU (PAT-CNN); false: plain double-conv
  // blocks with ReLU (vanilla U-Net baseline).
  bool residual = true;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

namespace nn {

// conv(stride) -> BN -> act -> conv -> BN -> act, plus a shortcut when
// residual. The shortcut is identity, a 1x1x1 projection when only the
// channel count changes, or a strided 3x3x3 convolution when downsampling.
template <typename T>
class ResidualUnit {
 public:
  ResidualUnit() = default;
  ResidualUnit(const std::string& name, std::size_t in_ch, std::size_t out_ch, int stride, bool residual)
      : residual_(residual),
        conv1_(name + ".conv1", in_ch, out_ch, 3, stride, false, false),
        norm1_(name + ".norm1", out_ch),
        act1_(name + ".act1", out_ch, residual),
        conv2_(name + ".conv2", out_ch, out_ch, 3, 1, false, false),
        norm2_(name + ".norm2", out_ch),
        act2_(name + ".act2", out_ch, residual) {
    if (residual && (stride != 1 || in_ch != out_ch)) {
      const int k = stride != 1 ? 3 : 1;
      shortcut_ = std::make_unique<Conv3d<T>>(name + ".shortcut", in_ch, out_ch, k, stride, false, true);
    }
  }

  template <typename Rng>
  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    if (shortcut_) shortcut_->init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> h = conv1_.forward(x, training);
    h = norm1_.forward(h, training);
    h = act1_.forward(h, training);
    h = conv2_.forward(h, training);
    h = norm2_.forward(h, training);
    h = act2_.forward(h, training);
    if (residual_) {
      if (shortcut_)
        h += shortcut_->forward(x, training);
      else
        h += x;
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> g = act2_.backward(dy);
    g = norm2_.backward(g);
    g = conv2_.backward(g);
    g = act1_.backward(g);
    g = norm1_.backward(g);
    g = conv1_.backward(g);
    if (residual_) {
      if (shortcut_)
        g += shortcut_->backward(dy);
      else
        g += dy;
    }
    return g;
  }

  template <typename F>
  void visit_params(F&& f) {
    conv1_.visit_params(f);
    norm1_.visit_params(f);
    act1_.visit_params(f);
    conv2_.visit_params(f);
    norm2_.visit_params(f);
    act2_.visit_params(f);
    if (shortcut_) shortcut_->visit_params(f);
  }
  template <typename F>
  void visit_buffers(F&& f) {
    norm1_.visit_buffers(f);
    norm2_.visit_buffers(f);
  }

 private:
  bool residual_ = true;
  Conv3d<T> conv1_;
  BatchNorm3d<T> norm1_;
  Activation<T> act1_;
  Conv3d<T> conv2_;
  BatchNorm3d<T> norm2_;
  Activation<T> act2_;
  std::unique_ptr<Conv3d<T>> shortcut_;
};

// Transposed conv (x2) -> BN -> act, concatenated after the skip tensor,
// then a stride-1 unit back down to out_ch.
template <typename T>
class UpBlock {
 public:
  UpBlock() = default;
  UpBlock(const std::string& name, std::size_t in_ch, std::size_t out_ch, bool residual)
      : out_ch_(out_ch),
        up_(name + ".up", in_ch, out_ch, 3, 2, true, false),
        norm_(name + ".up_norm", out_ch),
        act_(name + ".up_act", out_ch, residual),
        unit_(name + ".unit", 2 * out_ch, out_ch, 1, residual) {}

  template <typename Rng>
  void init(Rng& rng) {
    up_.init(rng);
    unit_.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& skip, bool training) {
    Tensor<T> u = up_.forward(x, training);
    u = norm_.forward(u, training);
    u = act_.forward(u, training);
    return unit_.forward(concat_channels(skip, u), training);
  }

  // Returns the gradient for x; adds the skip gradient into skip_grad.
  Tensor<T> backward(const Tensor<T>& dy, Tensor<T>& skip_grad) {
    const Tensor<T> joined = unit_.backward(dy);
    Tensor<T> d_skip, d_up;
    split_channels(joined, out_ch_, d_skip, d_up);
    skip_grad += d_skip;
    Tensor<T> g = act_.backward(d_up);
    g = norm_.backward(g);
    return up_.backward(g);
  }

  template <typename F>
  void visit_params(F&& f) {
    up_.visit_params(f);
    norm_.visit_params(f);
    act_.visit_params(f);
    unit_.visit_params(f);
  }
  template <typename F>
  void visit_buffers(F&& f) {
    norm_.visit_buffers(f);
    unit_.visit_buffers(f);
  }

 private:
  std::size_t out_ch_ = 0;
  Conv3d<T> up_;
  BatchNorm3d<T> norm_;
  Activation<T> act_;
  ResidualUnit<T> unit_;
};

}  // namespace nn

// 3D Res-UNet producing per-voxel foreground probabilities.
//
//   enc0: unit(1 -> c0)            full resolution
//   enc1..enc3: unit(stride 2)     1/2, 1/4, 1/8
//   bottleneck: unit(stride 2)     1/16
//   dec3..dec0: up x2, concat skip, unit
//   head: 3x3x3 conv (c0 -> 1) + sigmoid
template <typename T>
class ResUNet {
 public:
  explicit ResUNet(const ModelConfig& config, std::uint64_t seed = 0) : config_(config) {
    config.validate();
    const auto& c = config.channels;
    const bool r = config.residual;
    enc_[0] = nn::ResidualUnit<T>("enc0", 1, c[0], 1, r);
    for (std::size_t l = 1; l < ModelConfig::kLevels; ++l)
      enc_[l] = nn::ResidualUnit<T>("enc" + std::to_string(l), c[l - 1], c[l], 2, r);
    bottom_ = nn::ResidualUnit<T>("bottleneck", c[3], config.bottleneck, 2, r);
    for (std::size_t l = 0; l < ModelConfig::kLevels; ++l) {
      const std::size_t below = l + 1 < ModelConfig::kLevels ? c[l + 1] : config.bottleneck;
      dec_[l] = nn::UpBlock<T>("dec" + std::to_string(l), below, c[l], r);
    }
    head_ = nn::Conv3d<T>("head", c[0], 1, 3, 1, false, true);

    std::mt19937_64 rng(seed);
    for (auto& e : enc_) e.init(rng);
    bottom_.init(rng);
    for (auto& d : dec_) d.init(rng);
    head_.init(rng);
  }

  ResUNet(const ResUNet&) = delete;
  ResUNet& operator=(const ResUNet&) = delete;
  ResUNet(ResUNet&&) = default;
  ResUNet& operator=(ResUNet&&) = default;

  const ModelConfig& config() const { return config_; }

  // Input (batch, 1, X, Y, Z) with X, Y, Z divisible by 16. In training
  // mode batch norm uses batch statistics and activations are cached for
  // backward(); in evaluation mode nothing is cached.
  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training) {
    check_input(x);
    std::array<nn::Tensor<T>, ModelConfig::kLevels> skips;
    skips[0] = enc_[0].forward(x, training);
    for (std::size_t l = 1; l < ModelConfig::kLevels; ++l) skips[l] = enc_[l].forward(skips[l - 1], training);
    nn::Tensor<T> h = bottom_.forward(skips[3], training);
    for (std::size_t l = ModelConfig::kLevels; l-- > 0;) h = dec_[l].forward(h, skips[l], training);
    h = head_.forward(h, training);
    for (auto& v : h.values()) v = T(1) / (T(1) + std::exp(-v));
    if (training) probs_ = h;
    return h;
  }

  // Back-propagates dLoss/dprobability through the last training-mode
  // forward pass, accumulating parameter gradients.
  void backward(const nn::Tensor<T>& dprob) {
    if (probs_.empty() || !probs_.same_shape(dprob))
      throw ShapeError("ResUNet::backward: gradient does not match the last training forward pass");
    nn::Tensor<T> g = dprob;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T p = probs_.values()[i];
      g.values()[i] *= p * (T(1) - p);
    }
    probs_ = nn::Tensor<T>();
    g = head_.backward(g);

    std::array<nn::Tensor<T>, ModelConfig::kLevels> skip_grads;
    for (std::size_t l = ModelConfig::kLevels; l-- > 0;) {
      skip_grads[l] = zeros_like_skip(l, g);
    }
    for (std::size_t l = 0; l < ModelConfig::kLevels; ++l) g = dec_[l].backward(g, skip_grads[l]);
    g = bottom_.backward(g);
    for (std::size_t l = ModelConfig::kLevels; l-- > 0;) {
      g += skip_grads[l];
      g = enc_[l].backward(g);
    }
  }

  void zero_grad() {
    visit_params([](nn::Param<T>& p) { p.zero_grad(); });
  }

  template <typename F>
  void visit_params(F&& f) {
    for (auto& e : enc_) e.visit_params(f);
    bottom_.visit_params(f);
    for (auto& d : dec_) d.visit_params(f);
    head_.visit_params(f);
  }
  template <typename F>
  void visit_buffers(F&& f) {
    for (auto& e : enc_) e.visit_buffers(f);
    bottom_.visit_buffers(f);
    for (auto& d : dec_) d.visit_buffers(f);
  }

  std::vector<nn::Param<T>*> parameters() {
    std::vector<nn::Param<T>*> out;
    visit_params([&](nn::Param<T>& p) { out.push_back(&p); });
    return out;
  }
  std::vector<nn::Buffer<T>*> buffers() {
    std::vector<nn::Buffer<T>*> out;
    visit_buffers([&](nn::Buffer<T>& b) { out.push_back(&b); });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit_params([&](nn::Param<T>& p) { n += p.value.size(); });
    return n;
  }

  // Starts every output at probability `prior` by setting the head bias to
  // its logit; the head weights are left alone.
  void set_output_prior(double prior) {
    if (!(prior > 0 && prior < 1)) throw DomainError("ResUNet: output prior must lie in (0, 1)");
    std::fill(head_.bias().value.begin(), head_.bias().value.end(), static_cast<T>(std::log(prior / (1 - prior))));
  }

  // Zeroes the output convolution so every probability is exactly 0.5.
  void zero_output_layer() {
    std::fill(head_.weight().value.begin(), head_.weight().value.end(), T(0));
    std::fill(head_.bias().value.begin(), head_.bias().value.end(), T(0));
  }

 private:
  void check_input(const nn::Tensor<T>& x) const {
    if (x.channels() != 1) throw ShapeError("ResUNet: expected one input channel, got " + x.shape_string());
    const Dims& d = x.dims();
    const auto m = ModelConfig::kInputMultiple;
    if (x.batch() == 0 || d.nx % m || d.ny % m || d.nz % m || d.count() == 0)
      throw ShapeError("ResUNet: spatial dims must be non-zero multiples of 16, got " + x.shape_string());
  }

  nn::Tensor<T> zeros_like_skip(std::size_t level, const nn::Tensor<T>& top) const {
    Dims d = top.dims();
    for (std::size_t l = 0; l < level; ++l) d = {d.nx / 2, d.ny / 2, d.nz / 2};
    return nn::Tensor<T>(top.batch(), config_.channels[level], d);
  }

  ModelConfig config_;
  std::array<nn::ResidualUnit<T>, ModelConfig::kLevels> enc_;
  nn::ResidualUnit<T> bottom_;
  std::array<nn::UpBlock<T>, ModelConfig::kLevels> dec_;
  nn::Conv3d<T> head_;
  nn::Tensor<T> probs_;
};

extern template class ResUNet<float>;
extern template class ResUNet<double>;

// Number of learnable scalars for a configuration, without building it.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace patcnn
