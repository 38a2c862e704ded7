#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "volseg/error.hpp"

namespace volseg::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("mean of empty sample");
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator). Zero for a single value.
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Percentile in [0, 100] with linear interpolation between closest order
/// statistics (rank p/100 * (n - 1)). Sorts a copy.
inline double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) throw InvalidArgument("percentile of empty sample");
  std::sort(xs.begin(), xs.end());
  const double rank = p / 100.0 * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

struct MeanSd {
  double mean = 0;
  double sd = 0;
  std::size_t n = 0;
};

/// Mean and sample SD over the defined values; nullopt when none are defined.
inline std::optional<MeanSd> summarize(std::span<const std::optional<double>> values) {
  std::vector<double> xs;
  for (const auto& v : values) {
    if (v) xs.push_back(*v);
  }
  if (xs.empty()) return std::nullopt;
  return MeanSd{mean(xs), sample_sd(xs), xs.size()};
}

}  // namespace volseg::stats
