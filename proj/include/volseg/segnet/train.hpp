#pragma once

// Preprocessing, SGD training and sliding-window inference.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "volseg/error.hpp"
#include "volseg/segnet/config.hpp"
#include "volseg/segnet/loss.hpp"
#include "volseg/segnet/network.hpp"
#include "volseg/segnet/tensor.hpp"
#include "volseg/segnet/weights.hpp"
#include "volseg/volcore.hpp"

namespace volseg::segnet {

inline constexpr double kNormalizeSdFloor = 1e-8;

/// Zero mean, unit (population) SD over all voxels; constant volumes map to 0.
inline VoxelGrid zscore_normalize(const VoxelGrid& grid) {
  const auto v = grid.data();
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  std::vector<double> out(v.size(), 0.0);
  if (sd > kNormalizeSdFloor) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  }
  return VoxelGrid(grid.geometry(), std::move(out));
}

/// Normalized image with its label on the same lattice.
struct TrainSample {
  VoxelGrid image;
  LabelMask label;

  TrainSample(VoxelGrid img, LabelMask lbl) : image(std::move(img)), label(std::move(lbl)) {
    require_same_lattice(image.geometry(), label.geometry(), "training sample");
    for (double x : image.data()) {
      if (!std::isfinite(x)) throw InvalidArgument("training image contains non-finite values");
    }
  }
};

/// Mirror index into [0, n) without repeating the edge voxel; n == 1 maps to 0.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

template <typename T>
struct Patch {
  Tensor<T> image;                   // 1 x patch
  std::vector<std::uint8_t> labels;  // patch voxels
};

/// Extracts a patch starting at `origin`; coordinates beyond the grid reflect.
template <typename T>
Tensor<T> extract_patch(const VoxelGrid& grid, const Index3& origin, const Shape3& size) {
  Tensor<T> t(1, size);
  const auto& d = grid.dims();
  for (std::size_t z = 0; z < size[2]; ++z) {
    const std::size_t sz = reflect_index(origin[2] + static_cast<std::ptrdiff_t>(z), d[2]);
    for (std::size_t y = 0; y < size[1]; ++y) {
      const std::size_t sy = reflect_index(origin[1] + static_cast<std::ptrdiff_t>(y), d[1]);
      for (std::size_t x = 0; x < size[0]; ++x) {
        const std::size_t sx = reflect_index(origin[0] + static_cast<std::ptrdiff_t>(x), d[0]);
        t(0, x, y, z) = static_cast<T>(grid.at(sx, sy, sz));
      }
    }
  }
  return t;
}

inline std::vector<std::uint8_t> extract_label_patch(const LabelMask& mask, const Index3& origin, const Shape3& size) {
  std::vector<std::uint8_t> out(size[0] * size[1] * size[2]);
  const auto& d = mask.dims();
  std::size_t k = 0;
  for (std::size_t z = 0; z < size[2]; ++z) {
    const auto sz = static_cast<std::ptrdiff_t>(reflect_index(origin[2] + static_cast<std::ptrdiff_t>(z), d[2]));
    for (std::size_t y = 0; y < size[1]; ++y) {
      const auto sy = static_cast<std::ptrdiff_t>(reflect_index(origin[1] + static_cast<std::ptrdiff_t>(y), d[1]));
      for (std::size_t x = 0; x < size[0]; ++x) {
        const auto sx = static_cast<std::ptrdiff_t>(reflect_index(origin[0] + static_cast<std::ptrdiff_t>(x), d[0]));
        out[k++] = mask.at({sx, sy, sz}) ? 1 : 0;
      }
    }
  }
  return out;
}

template <typename T>
Patch<T> make_patch(const TrainSample& s, const Index3& origin, const Shape3& size) {
  return {extract_patch<T>(s.image, origin, size), extract_label_patch(s.label, origin, size)};
}

/// Mirrors a patch and its labels along the chosen axes.
template <typename T>
void flip_patch(Patch<T>& p, const std::array<bool, 3>& axes) {
  const Shape3 d = p.image.dims();
  Tensor<T> img(1, d);
  std::vector<std::uint8_t> lab(p.labels.size());
  for (std::size_t z = 0; z < d[2]; ++z) {
    for (std::size_t y = 0; y < d[1]; ++y) {
      for (std::size_t x = 0; x < d[0]; ++x) {
        const std::size_t sx = axes[0] ? d[0] - 1 - x : x;
        const std::size_t sy = axes[1] ? d[1] - 1 - y : y;
        const std::size_t sz = axes[2] ? d[2] - 1 - z : z;
        img(0, x, y, z) = p.image(0, sx, sy, sz);
        lab[(z * d[1] + y) * d[0] + x] = p.labels[(sz * d[1] + sy) * d[0] + sx];
      }
    }
  }
  p.image = std::move(img);
  p.labels = std::move(lab);
}

/// Mean loss over the batch and its parameter gradients.
template <typename T>
double compute_gradients(const std::vector<Patch<T>>& batch, const Weights<T>& weights, Weights<T>& grads) {
  if (batch.empty()) throw InvalidArgument("empty training batch");
  const SegNet<T> net(weights.config(), weights);
  grads = weights.zeros_like();
  double total = 0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ForwardCache<T> cache;
    const Tensor<T> scores = net.forward(batch[b].image, cache);
    Tensor<T> dscores;
    const double loss = dice_ce_loss(scores, std::span<const std::uint8_t>(batch[b].labels), dscores, scale);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "loss " << loss << " on batch element " << b;
      throw NonFiniteLoss(os.str());
    }
    total += loss * scale;
    net.backward(cache, dscores, grads);
  }
  return total;
}

/// One plain SGD step (w <- w - lr * g). Returns the batch loss before the update.
template <typename T>
double train_step(const std::vector<Patch<T>>& batch, Weights<T>& weights, double lr) {
  Weights<T> grads;
  const double loss = compute_gradients(batch, weights, grads);
  if (!grads.all_finite()) throw NonFiniteLoss("non-finite gradient at loss " + std::to_string(loss));
  weights.sgd_update(grads, lr);
  return loss;
}

struct TrainResult {
  Weights<float> weights;
  std::vector<double> epoch_loss;  // mean step loss per epoch
  std::size_t steps = 0;
};

struct TrainOptions {
  /// Called after every epoch with (epoch index, mean loss).
  std::function<void(std::size_t, double)> on_epoch;
};

/// Seeded, single-threaded SGD training. Samples larger than the patch are
/// randomly cropped, smaller ones reflect-padded.
inline TrainResult train(const NetworkConfig& config, const std::vector<TrainSample>& dataset,
                         const TrainOptions& options = {}) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("training needs at least one sample");
  TrainResult result{initialize_weights<float>(config), {}, 0};
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  const Shape3 patch = config.patch_size;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<Patch<float>> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
        const TrainSample& s = dataset[order[k]];
        Index3 origin{0, 0, 0};
        for (int a = 0; a < 3; ++a) {
          if (s.image.dims()[a] > patch[a]) {
            std::uniform_int_distribution<std::ptrdiff_t> pick(
                0, static_cast<std::ptrdiff_t>(s.image.dims()[a] - patch[a]));
            origin[a] = pick(rng);
          }
        }
        Patch<float> p = make_patch<float>(s, origin, patch);
        if (config.augment_flips) {
          std::bernoulli_distribution coin(0.5);
          const std::array<bool, 3> axes{coin(rng), coin(rng), coin(rng)};
          flip_patch(p, axes);
        }
        batch.push_back(std::move(p));
      }
      epoch_sum += train_step(batch, result.weights, config.learning_rate);
      ++epoch_steps;
      ++result.steps;
    }
    const double mean_loss = epoch_sum / static_cast<double>(epoch_steps);
    result.epoch_loss.push_back(mean_loss);
    if (options.on_epoch) options.on_epoch(epoch, mean_loss);
  }
  return result;
}

namespace detail {

inline std::vector<std::size_t> window_starts(std::size_t n, std::size_t patch) {
  if (n <= patch) return {0};
  const std::size_t step = std::max<std::size_t>(1, patch / 2);
  std::vector<std::size_t> s;
  for (std::size_t p = 0; p + patch <= n; p += step) s.push_back(p);
  if (s.back() + patch < n) s.push_back(n - patch);
  return s;
}

}  // namespace detail

/// Tiles the volume with 50%-overlapping patches (reflect-padded where the
/// volume is smaller than a patch), averages class scores over windows and
/// takes the argmax per voxel. Ties go to background.
template <typename T = float>
LabelMask sliding_window_infer(const VoxelGrid& grid, const Weights<T>& weights, const NetworkConfig& config) {
  config.validate();
  const SegNet<T> net(config, weights);
  const Dims& d = grid.dims();
  const Shape3 patch = config.patch_size;
  const std::size_t nvox = grid.size();
  std::vector<double> score0(nvox, 0.0), score1(nvox, 0.0);
  std::vector<std::uint32_t> hits(nvox, 0);
  const auto xs = detail::window_starts(d[0], patch[0]);
  const auto ys = detail::window_starts(d[1], patch[1]);
  const auto zs = detail::window_starts(d[2], patch[2]);
  for (std::size_t oz : zs) {
    for (std::size_t oy : ys) {
      for (std::size_t ox : xs) {
        const Index3 origin{static_cast<std::ptrdiff_t>(ox), static_cast<std::ptrdiff_t>(oy),
                            static_cast<std::ptrdiff_t>(oz)};
        const Tensor<T> scores = net.forward(extract_patch<T>(grid, origin, patch));
        for (std::size_t z = 0; z < std::min(patch[2], d[2] - oz); ++z) {
          for (std::size_t y = 0; y < std::min(patch[1], d[1] - oy); ++y) {
            for (std::size_t x = 0; x < std::min(patch[0], d[0] - ox); ++x) {
              const std::size_t i = grid.geometry().linear(ox + x, oy + y, oz + z);
              score0[i] += static_cast<double>(scores(0, x, y, z));
              score1[i] += static_cast<double>(scores(1, x, y, z));
              ++hits[i];
            }
          }
        }
      }
    }
  }
  std::vector<std::uint8_t> mask(nvox);
  for (std::size_t i = 0; i < nvox; ++i) mask[i] = score1[i] / hits[i] > score0[i] / hits[i] ? 1 : 0;
  return LabelMask(grid.geometry(), std::move(mask));
}

/// Raw image in, mask out: z-score normalisation followed by sliding-window inference.
template <typename T = float>
LabelMask segment_volume(const VoxelGrid& image, const Weights<T>& weights) {
  return sliding_window_infer<T>(zscore_normalize(image), weights, weights.config());
}

/// Noisy bright sphere on a dark background, already normalized, with its
/// ground-truth mask. `center` is in voxel coordinates.
inline TrainSample make_sphere_phantom(const Dims& dims, const std::array<double, 3>& center, double radius,
                                       double noise_sd, std::uint64_t seed, const Spacing& spacing = {1, 1, 1}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sd);
  const Geometry g(dims, spacing);
  std::vector<double> img(g.size());
  std::vector<std::uint8_t> lab(g.size());
  for (std::size_t z = 0; z < dims[2]; ++z) {
    for (std::size_t y = 0; y < dims[1]; ++y) {
      for (std::size_t x = 0; x < dims[0]; ++x) {
        const double dx = static_cast<double>(x) - center[0];
        const double dy = static_cast<double>(y) - center[1];
        const double dz = static_cast<double>(z) - center[2];
        const bool inside = dx * dx + dy * dy + dz * dz <= radius * radius;
        const std::size_t i = g.linear(x, y, z);
        lab[i] = inside ? 1 : 0;
        img[i] = (inside ? 1.0 : 0.0) + (noise_sd > 0 ? noise(rng) : 0.0);
      }
    }
  }
  return TrainSample(zscore_normalize(VoxelGrid(g, std::move(img))), LabelMask(g, std::move(lab)));
}

}  // namespace volseg::segnet
