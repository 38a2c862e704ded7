#pragma once

// Per-case overlap, boundary and volumetric metrics for a prediction against
// a reference mask.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "volseg/kdtree.hpp"
#include "volseg/stats.hpp"
#include "volseg/volcore.hpp"

namespace volseg {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Overlap scores. A score whose formula is 0/0 is nullopt, never 0.
struct OverlapMetrics {
  std::optional<double> dsc;
  std::optional<double> jaccard;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
};

struct VolumeMetrics {
  double pred_ml = 0;
  double ref_ml = 0;
  double error_ml = 0;  // pred - ref
};

struct MetricsRecord {
  std::optional<double> dsc;
  std::optional<double> jaccard;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> hd95_mm;
  double volume_pred_ml = 0;
  double volume_ref_ml = 0;
  double volume_error_ml = 0;
  bool failure = false;
  ConfusionCounts counts;
};

inline ConfusionCounts confusion(const SegmentationPair& pair) {
  const auto p = pair.prediction().voxels();
  const auto r = pair.reference().voxels();
  ConfusionCounts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const unsigned k = (p[i] << 1) | r[i];
    switch (k) {
      case 3: ++c.tp; break;
      case 2: ++c.fp; break;
      case 1: ++c.fn; break;
      default: ++c.tn; break;
    }
  }
  return c;
}

inline OverlapMetrics overlap_metrics(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) -> std::optional<double> {
    if (den == 0.0) return std::nullopt;
    return num / den;
  };
  const double tp = static_cast<double>(c.tp);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double tn = static_cast<double>(c.tn);
  OverlapMetrics m;
  m.dsc = ratio(2 * tp, 2 * tp + fp + fn);
  m.jaccard = ratio(tp, tp + fp + fn);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
  return m;
}

namespace detail {

inline std::vector<KdTree3::Point> surface_points(const LabelMask& mask) {
  const auto& g = mask.geometry();
  const auto& s = g.spacing();
  std::vector<KdTree3::Point> pts;
  for (std::size_t i : surface_voxels(mask)) {
    const Index3 c = g.coords(i);
    pts.push_back({static_cast<double>(c[0]) * s[0], static_cast<double>(c[1]) * s[1],
                   static_cast<double>(c[2]) * s[2]});
  }
  return pts;
}

inline double directed_percentile(const std::vector<KdTree3::Point>& from, const KdTree3& to,
                                  double pct) {
  std::vector<double> d;
  d.reserve(from.size());
  for (const auto& p : from) d.push_back(std::sqrt(to.nearest_sq(p)));
  return stats::percentile(std::move(d), pct);
}

}  // namespace detail

/// Directed 95th-percentile surface distance from `from` to `to`, in mm.
inline double directed_hd95(const LabelMask& from, const LabelMask& to) {
  require_same_lattice(from.geometry(), to.geometry(), "hd95");
  const auto a = detail::surface_points(from);
  const KdTree3 tree(detail::surface_points(to));
  return detail::directed_percentile(a, tree, 95.0);
}

/// Symmetric HD95: max of the two directed 95th-percentile distances between
/// 6-connected surfaces, Euclidean in mm. Throws EmptyMask if either side is empty.
inline double hd95(const SegmentationPair& pair) {
  const auto a = detail::surface_points(pair.prediction());
  const auto b = detail::surface_points(pair.reference());
  const KdTree3 ta(a);
  const KdTree3 tb(b);
  return std::max(detail::directed_percentile(a, tb, 95.0), detail::directed_percentile(b, ta, 95.0));
}

inline VolumeMetrics volumes(const SegmentationPair& pair) {
  const double per_voxel = voxel_volume_ml(pair.geometry());
  VolumeMetrics v;
  v.pred_ml = static_cast<double>(mask_count(pair.prediction())) * per_voxel;
  v.ref_ml = static_cast<double>(mask_count(pair.reference())) * per_voxel;
  v.error_ml = v.pred_ml - v.ref_ml;
  return v;
}

/// All per-case metrics. An empty prediction against a non-empty reference is
/// a failure: overlap scores are 0 and HD95 is undefined.
inline MetricsRecord evaluate_pair(const SegmentationPair& pair) {
  MetricsRecord r;
  r.counts = confusion(pair);
  const auto o = overlap_metrics(r.counts);
  r.dsc = o.dsc;
  r.jaccard = o.jaccard;
  r.precision = o.precision;
  r.recall = o.recall;
  r.accuracy = o.accuracy;
  const auto v = volumes(pair);
  r.volume_pred_ml = v.pred_ml;
  r.volume_ref_ml = v.ref_ml;
  r.volume_error_ml = v.error_ml;

  const bool pred_empty = r.counts.tp + r.counts.fp == 0;
  const bool ref_empty = r.counts.tp + r.counts.fn == 0;
  if (pred_empty && !ref_empty) {
    r.failure = true;
    r.dsc = 0.0;
    r.jaccard = 0.0;
    r.recall = 0.0;
    r.precision = 0.0;
  } else if (!pred_empty && !ref_empty) {
    r.hd95_mm = hd95(pair);
  }
  return r;
}

}  // namespace volseg
