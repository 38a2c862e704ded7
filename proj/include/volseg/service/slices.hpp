#pragma once

// Axis-aligned slice extraction and 8-bit window/level mapping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volseg/error.hpp"
#include "volseg/stats.hpp"
#include "volseg/volcore.hpp"

namespace volseg::service {

struct Window {
  double lo = 0;
  double hi = 1;
};

/// 1st to 99th percentile of all voxel intensities.
inline Window default_window(const VoxelGrid& grid) {
  std::vector<double> v(grid.data().begin(), grid.data().end());
  return {stats::percentile(v, 1.0), stats::percentile(v, 99.0)};
}

inline std::uint8_t to_byte(double v, const Window& w) {
  if (!(w.hi > w.lo)) return v > w.lo ? 255 : 0;
  const double t = (v - w.lo) / (w.hi - w.lo);
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

/// Parses "x", "y" or "z" (the axis normal to the slice).
inline int parse_axis(const std::string& s) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  throw InvalidArgument("axis must be x, y or z, got '" + s + "'");
}

struct SliceLayout {
  std::size_t width = 0;   // along the first in-plane axis
  std::size_t height = 0;  // along the second in-plane axis
};

/// In-plane axes: x -> (y, z), y -> (x, z), z -> (x, y).
inline SliceLayout slice_layout(const Dims& d, int axis) {
  switch (axis) {
    case 0: return {d[1], d[2]};
    case 1: return {d[0], d[2]};
    default: return {d[0], d[1]};
  }
}

inline void check_slice_index(const Dims& d, int axis, long long index) {
  const char name = static_cast<char>('x' + axis);
  if (index < 0 || static_cast<std::size_t>(index) >= d[static_cast<std::size_t>(axis)]) {
    throw InvalidArgument(std::string("slice index ") + std::to_string(index) + " out of range for axis " + name +
                          " with extent " + std::to_string(d[static_cast<std::size_t>(axis)]) + " (valid 0.." +
                          std::to_string(static_cast<long long>(d[static_cast<std::size_t>(axis)]) - 1) + ")");
  }
}

/// Linear voxel indices of one slice in row-major image order.
inline std::vector<std::size_t> slice_indices(const Geometry& g, int axis, std::size_t index) {
  const auto& d = g.dims();
  const SliceLayout l = slice_layout(d, axis);
  std::vector<std::size_t> out;
  out.reserve(l.width * l.height);
  for (std::size_t r = 0; r < l.height; ++r) {
    for (std::size_t c = 0; c < l.width; ++c) {
      switch (axis) {
        case 0: out.push_back(g.linear(index, c, r)); break;
        case 1: out.push_back(g.linear(c, index, r)); break;
        default: out.push_back(g.linear(c, r, index)); break;
      }
    }
  }
  return out;
}

struct SliceImage {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;                 // 2 when a mask overlay is attached as the second channel
  std::vector<std::uint8_t> pixels; // interleaved
};

/// Grayscale slice, optionally with the mask (0 / 255) interleaved as a second channel.
inline SliceImage render_slice(const VoxelGrid& grid, int axis, long long index, const Window& w,
                               const LabelMask* overlay = nullptr) {
  check_slice_index(grid.dims(), axis, index);
  if (overlay) require_same_lattice(grid.geometry(), overlay->geometry(), "slice overlay");
  const auto idx = slice_indices(grid.geometry(), axis, static_cast<std::size_t>(index));
  const SliceLayout l = slice_layout(grid.dims(), axis);
  SliceImage img{l.width, l.height, overlay ? 2 : 1, {}};
  img.pixels.reserve(idx.size() * static_cast<std::size_t>(img.channels));
  const auto data = grid.data();
  for (std::size_t i : idx) {
    img.pixels.push_back(to_byte(data[i], w));
    if (overlay) img.pixels.push_back((*overlay)[i] ? 255 : 0);
  }
  return img;
}

}  // namespace volseg::service
