#pragma once

// Volumetric data model: grid geometry, scalar volumes, binary masks and
// boundary extraction. Voxel data is stored x-fastest, matching NIFTI.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "volseg/error.hpp"

namespace volseg {

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;
using Index3 = std::array<std::ptrdiff_t, 3>;

inline Affine diagonal_affine(const Spacing& spacing) {
  Affine a{};
  for (int i = 0; i < 3; ++i) a[i][i] = spacing[i];
  a[3][3] = 1.0;
  return a;
}

/// Euclidean norm of each of the affine's first three columns.
inline Spacing affine_column_norms(const Affine& a) {
  Spacing s{};
  for (int c = 0; c < 3; ++c) {
    s[c] = std::sqrt(a[0][c] * a[0][c] + a[1][c] * a[1][c] + a[2][c] * a[2][c]);
  }
  return s;
}

inline std::string dims_string(const Dims& d) {
  std::ostringstream os;
  os << d[0] << "x" << d[1] << "x" << d[2];
  return os.str();
}

/// Lattice geometry shared by images and masks.
class Geometry {
 public:
  static constexpr double kSpacingTolerance = 1e-6;

  Geometry(Dims dims, Spacing spacing) : Geometry(dims, spacing, diagonal_affine(spacing)) {}

  Geometry(Dims dims, Spacing spacing, const Affine& affine)
      : dims_(dims), spacing_(spacing), affine_(affine) {
    for (int i = 0; i < 3; ++i) {
      if (dims_[i] < 1) throw InvalidArgument("grid dims must be >= 1, got " + dims_string(dims_));
      if (!(spacing_[i] > 0.0) || !std::isfinite(spacing_[i])) {
        throw InvalidArgument("grid spacing must be positive and finite");
      }
    }
    const Spacing norms = affine_column_norms(affine_);
    for (int i = 0; i < 3; ++i) {
      if (std::abs(norms[i] - spacing_[i]) > kSpacingTolerance * spacing_[i]) {
        std::ostringstream os;
        os << "affine column " << i << " has norm " << norms[i] << " but spacing is " << spacing_[i];
        throw InvalidArgument(os.str());
      }
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  const Affine& affine() const noexcept { return affine_; }

  std::size_t size() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }

  std::size_t linear(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims_[0] * (y + dims_[1] * z);
  }

  Index3 coords(std::size_t i) const noexcept {
    const auto x = i % dims_[0];
    const auto y = (i / dims_[0]) % dims_[1];
    const auto z = i / (dims_[0] * dims_[1]);
    return {static_cast<std::ptrdiff_t>(x), static_cast<std::ptrdiff_t>(y),
            static_cast<std::ptrdiff_t>(z)};
  }

  bool contains(const Index3& p) const noexcept {
    for (int a = 0; a < 3; ++a) {
      if (p[a] < 0 || p[a] >= static_cast<std::ptrdiff_t>(dims_[a])) return false;
    }
    return true;
  }

  /// Lattice compatibility: same dims and spacing within kSpacingTolerance
  /// (relative), which absorbs float32 header storage. The affine is not compared.
  bool same_lattice(const Geometry& other) const noexcept {
    if (dims_ != other.dims_) return false;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(spacing_[i] - other.spacing_[i]) > kSpacingTolerance * spacing_[i]) return false;
    }
    return true;
  }

 private:
  Dims dims_;
  Spacing spacing_;
  Affine affine_;
};

inline void require_same_lattice(const Geometry& a, const Geometry& b, std::string_view what) {
  if (!a.same_lattice(b)) {
    std::ostringstream os;
    os << what << ": dims " << dims_string(a.dims()) << " spacing (" << a.spacing()[0] << ","
       << a.spacing()[1] << "," << a.spacing()[2] << ") vs dims " << dims_string(b.dims())
       << " spacing (" << b.spacing()[0] << "," << b.spacing()[1] << "," << b.spacing()[2] << ")";
    throw GeometryMismatch(os.str());
  }
}

/// Scalar volume on a lattice.
class VoxelGrid {
 public:
  VoxelGrid(Geometry geometry, std::vector<double> data)
      : geometry_(std::move(geometry)), data_(std::move(data)) {
    if (data_.size() != geometry_.size()) {
      throw InvalidArgument("voxel data length " + std::to_string(data_.size()) +
                            " does not match dims " + dims_string(geometry_.dims()));
    }
  }

  VoxelGrid(Dims dims, Spacing spacing, std::vector<double> data)
      : VoxelGrid(Geometry(dims, spacing), std::move(data)) {}

  const Geometry& geometry() const noexcept { return geometry_; }
  const Dims& dims() const noexcept { return geometry_.dims(); }
  const Spacing& spacing() const noexcept { return geometry_.spacing(); }
  const Affine& affine() const noexcept { return geometry_.affine(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[geometry_.linear(x, y, z)];
  }

 private:
  Geometry geometry_;
  std::vector<double> data_;
};

/// Binary foreground mask (0 background, 1 foreground) on a lattice.
class LabelMask {
 public:
  LabelMask(Geometry geometry, std::vector<std::uint8_t> voxels)
      : geometry_(std::move(geometry)), voxels_(std::move(voxels)) {
    if (voxels_.size() != geometry_.size()) {
      throw InvalidArgument("mask length " + std::to_string(voxels_.size()) +
                            " does not match dims " + dims_string(geometry_.dims()));
    }
    for (auto v : voxels_) {
      if (v > 1) throw InvalidArgument("mask values must be 0 or 1");
    }
  }

  /// Empty (all background) mask on the given lattice.
  explicit LabelMask(Geometry geometry)
      : geometry_(std::move(geometry)), voxels_(geometry_.size(), 0) {}

  /// Binarizes an intensity volume: foreground where value > threshold.
  static LabelMask from_grid(const VoxelGrid& grid, double threshold = 0.5) {
    std::vector<std::uint8_t> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = grid[i] > threshold ? 1 : 0;
    return LabelMask(grid.geometry(), std::move(v));
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Dims& dims() const noexcept { return geometry_.dims(); }
  const Spacing& spacing() const noexcept { return geometry_.spacing(); }
  std::size_t size() const noexcept { return voxels_.size(); }

  std::span<const std::uint8_t> voxels() const noexcept { return voxels_; }
  bool operator[](std::size_t i) const noexcept { return voxels_[i] != 0; }
  bool at(const Index3& p) const noexcept {
    return voxels_[geometry_.linear(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]),
                                    static_cast<std::size_t>(p[2]))] != 0;
  }

  VoxelGrid to_grid() const {
    return VoxelGrid(geometry_, std::vector<double>(voxels_.begin(), voxels_.end()));
  }

  friend bool operator==(const LabelMask& a, const LabelMask& b) {
    return a.geometry_.same_lattice(b.geometry_) && a.voxels_ == b.voxels_;
  }

 private:
  Geometry geometry_;
  std::vector<std::uint8_t> voxels_;
};

/// Prediction and reference on the same lattice.
class SegmentationPair {
 public:
  SegmentationPair(LabelMask prediction, LabelMask reference)
      : prediction_(std::move(prediction)), reference_(std::move(reference)) {
    require_same_lattice(prediction_.geometry(), reference_.geometry(), "prediction vs reference");
  }

  const LabelMask& prediction() const noexcept { return prediction_; }
  const LabelMask& reference() const noexcept { return reference_; }
  const Geometry& geometry() const noexcept { return reference_.geometry(); }

  SegmentationPair swapped() const { return SegmentationPair(reference_, prediction_); }

 private:
  LabelMask prediction_;
  LabelMask reference_;
};

/// Millilitres per voxel (mm^3 / 1000).
inline double voxel_volume_ml(const Geometry& g) noexcept {
  return g.spacing()[0] * g.spacing()[1] * g.spacing()[2] / 1000.0;
}
inline double voxel_volume_ml(const VoxelGrid& grid) noexcept { return voxel_volume_ml(grid.geometry()); }

inline std::size_t mask_count(const LabelMask& mask) noexcept {
  std::size_t n = 0;
  for (auto v : mask.voxels()) n += v;
  return n;
}

/// Foreground voxels with at least one 6-neighbour that is background or
/// outside the grid. Returned as ascending linear indices.
inline std::vector<std::size_t> surface_voxels(const LabelMask& mask) {
  const auto& g = mask.geometry();
  const auto [nx, ny, nz] = g.dims();
  const auto v = mask.voxels();
  std::vector<std::size_t> out;
  bool any = false;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t i = g.linear(x, y, z);
        if (!v[i]) continue;
        any = true;
        const bool interior = x > 0 && x + 1 < nx && y > 0 && y + 1 < ny && z > 0 && z + 1 < nz &&
                              v[i - 1] && v[i + 1] && v[i - nx] && v[i + nx] &&
                              v[i - nx * ny] && v[i + nx * ny];
        if (!interior) out.push_back(i);
      }
    }
  }
  if (!any) throw EmptyMask("mask has no foreground voxels");
  return out;
}

}  // namespace volseg
