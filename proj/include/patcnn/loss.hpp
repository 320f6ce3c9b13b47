#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "patcnn/volume.hpp"

namespace patcnn {

enum class LossVariant {
  // 1 - Dice - (1/N) sum x log y: the cross-entropy term only sees foreground.
  AsWritten,
  // Same Dice term with the usual two-sided binary cross-entropy.
  FullBce,
};

struct LossConfig {
  double epsilon = 1e-5;
  LossVariant variant = LossVariant::AsWritten;
};

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view s);

struct LossTerms {
  double total = 0;
  double dice = 0;           // the smoothed Dice coefficient, not 1 - Dice
  double cross_entropy = 0;  // non-negative
};

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] inside the
// logarithms only; the Dice term uses them unclamped.
inline constexpr double kProbClamp = 1e-7;

namespace detail {
void check_loss_inputs(std::size_t n_pred, std::size_t n_target, const LossConfig& cfg);
[[noreturn]] void throw_loss_range(const char* what);
}  // namespace detail

// Combined Dice + cross-entropy loss over flattened predictions and binary
// targets. When grad is non-empty it receives dLoss/dpred (same length);
// the gradient of a clamped log is taken as zero outside the clamp range.
template <typename P, typename X>
LossTerms combined_loss(std::span<const P> pred, std::span<const X> target, const LossConfig& cfg,
                        std::span<P> grad = {}) {
  detail::check_loss_inputs(pred.size(), target.size(), cfg);
  if (!grad.empty() && grad.size() != pred.size())
    throw DomainError("combined_loss: gradient buffer has the wrong length");

  const std::size_t n = pred.size();
  const double lo = kProbClamp, hi = 1.0 - kProbClamp;
  const bool two_sided = cfg.variant == LossVariant::FullBce;

  double sum_xy = 0, sum_x = 0, sum_y = 0, ce = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = static_cast<double>(pred[i]);
    const double x = static_cast<double>(target[i]);
    if (!(y >= 0.0 && y <= 1.0)) detail::throw_loss_range("prediction outside [0, 1]");
    if (x != 0.0 && x != 1.0) detail::throw_loss_range("target not in {0, 1}");
    sum_xy += x * y;
    sum_x += x;
    sum_y += y;
    const double yc = std::clamp(y, lo, hi);
    if (x != 0.0) ce -= std::log(yc);
    if (two_sided && x == 0.0) ce -= std::log(1.0 - yc);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double num = 2.0 * sum_xy + cfg.epsilon;
  const double den = sum_x + sum_y + cfg.epsilon;

  LossTerms t;
  t.dice = num / den;
  t.cross_entropy = ce * inv_n;
  t.total = 1.0 - t.dice + t.cross_entropy;

  if (!grad.empty()) {
    const double den2 = den * den;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = static_cast<double>(pred[i]);
      const double x = static_cast<double>(target[i]);
      double g = -(2.0 * x * den - num) / den2;
      const bool inside = y >= lo && y <= hi;
      if (inside) {
        if (x != 0.0) g -= inv_n / y;
        if (two_sided && x == 0.0) g += inv_n / (1.0 - y);
      }
      grad[i] = static_cast<P>(g);
    }
  }
  return t;
}

}  // namespace patcnn
