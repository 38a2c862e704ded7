#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace volseg::segnet {

using Shape3 = std::array<std::size_t, 3>;

/// Channel-major feature volume: index ((c * nz + z) * ny + y) * nx + x.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t channels, Shape3 dims)
      : channels_(channels), dims_(dims), data_(channels * dims[0] * dims[1] * dims[2], T(0)) {}

  std::size_t channels() const noexcept { return channels_; }
  const Shape3& dims() const noexcept { return dims_; }
  std::size_t voxels() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }
  std::size_t size() const noexcept { return data_.size(); }

  T* channel(std::size_t c) noexcept { return data_.data() + c * voxels(); }
  const T* channel(std::size_t c) const noexcept { return data_.data() + c * voxels(); }

  T& operator()(std::size_t c, std::size_t x, std::size_t y, std::size_t z) noexcept {
    return data_[((c * dims_[2] + z) * dims_[1] + y) * dims_[0] + x];
  }
  T operator()(std::size_t c, std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[((c * dims_[2] + z) * dims_[1] + y) * dims_[0] + x];
  }

  std::span<T> span() noexcept { return data_; }
  std::span<const T> span() const noexcept { return data_; }
  std::vector<T>& vec() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor zeros_like() const { return Tensor(channels_, dims_); }

 private:
  std::size_t channels_ = 0;
  Shape3 dims_{0, 0, 0};
  std::vector<T> data_;
};

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out(a.channels() + b.channels(), a.dims());
  std::copy(a.vec().begin(), a.vec().end(), out.vec().begin());
  std::copy(b.vec().begin(), b.vec().end(), out.vec().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

}  // namespace volseg::segnet
