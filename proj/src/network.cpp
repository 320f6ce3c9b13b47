#include "patcnn/network.hpp"

namespace patcnn {

void ModelConfig::validate() const {
  for (std::size_t c : channels)
    if (c == 0) throw DomainError("ModelConfig: channel counts must be positive");
  if (bottleneck == 0) throw DomainError("ModelConfig: bottleneck width must be positive");
}

namespace {

std::size_t conv(std::size_t in, std::size_t out, std::size_t k, bool bias) {
  return out * in * k * k * k + (bias ? out : 0);
}

std::size_t unit(std::size_t in, std::size_t out, int stride, bool residual) {
  std::size_t n = conv(in, out, 3, false) + conv(out, out, 3, false) + 4 * out;
  if (residual) n += 2 * out;  // PReLU slopes
  if (residual && (stride != 1 || in != out)) n += conv(in, out, stride != 1 ? 3 : 1, true);
  return n;
}

}  // namespace

std::size_t parameter_count(const ModelConfig& config) {
  config.validate();
  const auto& c = config.channels;
  const bool r = config.residual;
  std::size_t n = unit(1, c[0], 1, r);
  for (std::size_t l = 1; l < ModelConfig::kLevels; ++l) n += unit(c[l - 1], c[l], 2, r);
  n += unit(c[3], config.bottleneck, 2, r);
  for (std::size_t l = 0; l < ModelConfig::kLevels; ++l) {
    const std::size_t below = l + 1 < ModelConfig::kLevels ? c[l + 1] : config.bottleneck;
    n += conv(below, c[l], 3, false) + 2 * c[l] + (r ? c[l] : 0) + unit(2 * c[l], c[l], 1, r);
  }
  n += conv(c[0], 1, 3, true);
  return n;
}

template class ResUNet<float>;
template class ResUNet<double>;

}  // namespace patcnn
