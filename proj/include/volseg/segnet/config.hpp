#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "volseg/error.hpp"

namespace volseg::segnet {

/// Encoder / bottleneck-attention / decoder network description plus the
/// optimisation settings used to train it.
struct NetworkConfig {
  std::array<std::size_t, 3> patch_size{32, 32, 32};
  std::size_t base_channels = 4;
  std::size_t depth = 2;
  std::size_t attention_heads = 2;
  std::size_t attention_dim = 16;
  std::size_t num_classes = 2;
  double learning_rate = 0.01;
  std::size_t batch_size = 2;
  std::size_t epochs = 600;
  std::uint64_t seed = 0;
  bool augment_flips = false;

  /// Channels at encoder level `level` (0 = full resolution, depth = bottleneck).
  std::size_t channels(std::size_t level) const { return base_channels << level; }

  std::size_t patch_voxels() const { return patch_size[0] * patch_size[1] * patch_size[2]; }

  void validate() const {
    if (num_classes != 2) throw InvalidArgument("num_classes must be 2");
    if (base_channels < 1) throw InvalidArgument("base_channels must be >= 1");
    if (depth < 1 || depth > 6) throw InvalidArgument("depth must be in [1, 6]");
    if (attention_heads < 1 || attention_dim < 1) throw InvalidArgument("attention sizes must be >= 1");
    if (attention_dim % attention_heads != 0) {
      throw InvalidArgument("attention_dim " + std::to_string(attention_dim) +
                            " is not divisible by attention_heads " + std::to_string(attention_heads));
    }
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
    for (std::size_t p : patch_size) {
      if (p == 0 || (p & (p - 1)) != 0) {
        throw InvalidArgument("patch sizes must be powers of two, got " + std::to_string(p));
      }
      if (p % (std::size_t{1} << depth) != 0) {
        throw InvalidArgument("patch size " + std::to_string(p) + " is not divisible by 2^depth");
      }
    }
  }
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = {{"patch_size", c.patch_size},
       {"base_channels", c.base_channels},
       {"depth", c.depth},
       {"attention_heads", c.attention_heads},
       {"attention_dim", c.attention_dim},
       {"num_classes", c.num_classes},
       {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"seed", c.seed},
       {"augment_flips", c.augment_flips}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.patch_size = j.value("patch_size", c.patch_size);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.augment_flips = j.value("augment_flips", c.augment_flips);
}

/// Closed-form number of learnable scalars for a configuration.
inline std::size_t parameter_count(const NetworkConfig& c) {
  std::size_t total = 0;
  std::size_t in = 1;
  for (std::size_t s = 0; s < c.depth; ++s) {
    const std::size_t cs = c.channels(s), cn = c.channels(s + 1);
    total += 27 * in * cs + 2 * cs;  // encoder conv + norm
    total += 8 * cs * cn + cn;       // strided down conv
    in = cn;
  }
  const std::size_t cb = c.channels(c.depth);
  const std::size_t d = c.attention_dim;
  total += 27 * cb * cb + 2 * cb;       // bottleneck conv + norm
  total += d * cb + 4 * d * d + cb * d;  // token embed, Q/K/V/O, projection back
  for (std::size_t s = 0; s < c.depth; ++s) {
    const std::size_t cs = c.channels(s), cn = c.channels(s + 1);
    total += 8 * cn * cs + cs;               // transposed up conv
    total += 27 * (2 * cs) * cs + 2 * cs;    // decoder conv + norm
  }
  total += c.num_classes * c.channels(0) + c.num_classes;  // 1x1x1 head
  return total;
}

}  // namespace volseg::segnet
