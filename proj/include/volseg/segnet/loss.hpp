#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <span>
#include <vector>

#include "volseg/segnet/tensor.hpp"

namespace volseg::segnet {

inline constexpr double kDiceSmooth = 1.0;

/// Cross-entropy (voxel mean) plus soft-Dice loss on the foreground class,
/// equally weighted. Writes d(loss)/d(scores) into `dscores` (scaled by
/// `grad_scale`) and returns the loss.
template <typename T>
double dice_ce_loss(const Tensor<T>& scores, std::span<const std::uint8_t> labels, Tensor<T>& dscores,
                    double grad_scale = 1.0) {
  const std::size_t n = scores.voxels();
  const T* z0 = scores.channel(0);
  const T* z1 = scores.channel(1);
  dscores = scores.zeros_like();
  T* g0 = dscores.channel(0);
  T* g1 = dscores.channel(1);

  std::vector<double> p1(n);
  double ce = 0, inter = 0, psum = 0, gsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = static_cast<double>(z0[i]), b = static_cast<double>(z1[i]);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    p1[i] = std::exp(b - lse);
    ce -= labels[i] ? b - lse : a - lse;
    inter += p1[i] * labels[i];
    psum += p1[i];
    gsum += labels[i];
  }
  ce /= static_cast<double>(n);
  const double den = psum + gsum + kDiceSmooth;
  const double num = 2 * inter + kDiceSmooth;
  const double dice_loss = 1.0 - num / den;

  for (std::size_t i = 0; i < n; ++i) {
    // CE: d/dz1 = (p1 - y) / n, d/dz0 = -(p1 - y) / n for two classes.
    const double dce = (p1[i] - labels[i]) / static_cast<double>(n);
    const double dp1 = -(2.0 * labels[i] * den - num) / (den * den);
    const double ddice = dp1 * p1[i] * (1.0 - p1[i]);
    const double dz1 = (dce + ddice) * grad_scale;
    g1[i] = static_cast<T>(dz1);
    g0[i] = static_cast<T>(-dz1);
  }
  return ce + dice_loss;
}

}  // namespace volseg::segnet
