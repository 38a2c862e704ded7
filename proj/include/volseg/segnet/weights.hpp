#pragma once

// Named parameter blocks and their on-disk container.
//
// Container layout (all integers little-endian uint32):
//   "VSGW" | version | config_json_len | config JSON | block_count |
//   per block: name_len | name | ndim | dims[ndim] | float32 LE payload

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "volseg/error.hpp"
#include "volseg/niftio.hpp"
#include "volseg/segnet/config.hpp"

namespace volseg::segnet {

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t fan_in = 1;

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
};

/// Ordered parameter block descriptions for a configuration.
inline std::vector<ParamSpec> describe_parameters(const NetworkConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  auto block = [&](std::string prefix, std::size_t in, std::size_t out) {
    specs.push_back({prefix + ".conv.w", {out, in, 27}, 27 * in});
    specs.push_back({prefix + ".norm.gamma", {out}, 1});
    specs.push_back({prefix + ".norm.beta", {out}, 1});
  };
  std::size_t in = 1;
  for (std::size_t s = 0; s < c.depth; ++s) {
    const auto tag = std::to_string(s);
    block("enc" + tag, in, c.channels(s));
    specs.push_back({"down" + tag + ".w", {c.channels(s + 1), c.channels(s), 8}, 8 * c.channels(s)});
    specs.push_back({"down" + tag + ".b", {c.channels(s + 1)}, 1});
    in = c.channels(s + 1);
  }
  const std::size_t cb = c.channels(c.depth);
  const std::size_t d = c.attention_dim;
  block("bottleneck", cb, cb);
  specs.push_back({"attn.embed.w", {d, cb}, cb});
  for (const char* p : {"attn.q.w", "attn.k.w", "attn.v.w", "attn.o.w"}) specs.push_back({p, {d, d}, d});
  specs.push_back({"attn.proj.w", {cb, d}, d});
  for (std::size_t s = c.depth; s-- > 0;) {
    const auto tag = std::to_string(s);
    specs.push_back({"up" + tag + ".w", {c.channels(s + 1), c.channels(s), 8}, c.channels(s + 1)});
    specs.push_back({"up" + tag + ".b", {c.channels(s)}, 1});
    block("dec" + tag, 2 * c.channels(s), c.channels(s));
  }
  specs.push_back({"head.w", {c.num_classes, c.channels(0)}, c.channels(0)});
  specs.push_back({"head.b", {c.num_classes}, 1});
  return specs;
}

template <typename T>
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
};

template <typename T>
class Weights {
 public:
  Weights() = default;

  /// All-zero parameters laid out for `config`.
  explicit Weights(const NetworkConfig& config) : config_(config) {
    for (const auto& s : describe_parameters(config)) {
      index_[s.name] = blocks_.size();
      blocks_.push_back({s.name, s.shape, std::vector<T>(s.size(), T(0))});
    }
  }

  const NetworkConfig& config() const noexcept { return config_; }
  std::vector<ParamBlock<T>>& blocks() noexcept { return blocks_; }
  const std::vector<ParamBlock<T>>& blocks() const noexcept { return blocks_; }

  ParamBlock<T>& block(const std::string& name) { return blocks_.at(lookup(name)); }
  const ParamBlock<T>& block(const std::string& name) const { return blocks_.at(lookup(name)); }
  std::span<T> operator[](const std::string& name) { return block(name).values; }
  std::span<const T> operator[](const std::string& name) const { return block(name).values; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.values.size();
    return n;
  }

  Weights zeros_like() const {
    Weights w = *this;
    for (auto& b : w.blocks_) std::fill(b.values.begin(), b.values.end(), T(0));
    return w;
  }

  template <typename U>
  Weights<U> cast() const {
    Weights<U> w(config_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      std::transform(blocks_[i].values.begin(), blocks_[i].values.end(), w.blocks()[i].values.begin(),
                     [](T v) { return static_cast<U>(v); });
    }
    return w;
  }

  bool all_finite() const {
    for (const auto& b : blocks_) {
      for (T v : b.values) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  /// w <- w - lr * g
  void sgd_update(const Weights& grads, double lr) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& w = blocks_[i].values;
      const auto& g = grads.blocks_[i].values;
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= static_cast<T>(lr) * g[k];
    }
  }

  friend bool operator==(const Weights& a, const Weights& b) {
    if (a.blocks_.size() != b.blocks_.size()) return false;
    for (std::size_t i = 0; i < a.blocks_.size(); ++i) {
      if (a.blocks_[i].name != b.blocks_[i].name || a.blocks_[i].values != b.blocks_[i].values) return false;
    }
    return true;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw InvalidArgument("no parameter block named '" + name + "'");
    return it->second;
  }

  NetworkConfig config_;
  std::vector<ParamBlock<T>> blocks_;
  std::map<std::string, std::size_t> index_;
};

/// Seeded He-normal initialisation; norm gains 1, biases 0. The attention
/// output projection starts small so the residual path dominates early.
template <typename T>
Weights<T> initialize_weights(const NetworkConfig& config) {
  Weights<T> w(config);
  std::mt19937_64 rng(config.seed);
  const auto specs = describe_parameters(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    auto& v = w.blocks()[i].values;
    if (s.name.ends_with(".gamma")) {
      std::fill(v.begin(), v.end(), T(1));
    } else if (s.name.ends_with(".beta") || s.name.ends_with(".b")) {
      std::fill(v.begin(), v.end(), T(0));
    } else {
      double sd = std::sqrt(2.0 / static_cast<double>(s.fan_in));
      if (s.name.starts_with("attn.")) sd = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
      if (s.name == "attn.proj.w") sd *= 0.1;
      std::normal_distribution<double> dist(0.0, sd);
      for (auto& x : v) x = static_cast<T>(dist(rng));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr char kWeightsMagic[4] = {'V', 'S', 'G', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteCursor {
 public:
  explicit ByteCursor(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw TruncatedData("weights container ends early");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> serialize_weights(const Weights<T>& w) {
  std::vector<std::uint8_t> out(kWeightsMagic, kWeightsMagic + 4);
  detail::put_u32(out, kWeightsVersion);
  const std::string cfg = nlohmann::json(w.config()).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  detail::put_u32(out, static_cast<std::uint32_t>(w.blocks().size()));
  for (const auto& b : w.blocks()) {
    detail::put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.insert(out.end(), b.name.begin(), b.name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
    for (auto d : b.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (T v : b.values) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      detail::put_u32(out, bits);
    }
  }
  return out;
}

template <typename T = float>
Weights<T> deserialize_weights(std::span<const std::uint8_t> bytes) {
  detail::ByteCursor cur(bytes);
  const auto magic = cur.take(4);
  if (std::memcmp(magic.data(), kWeightsMagic, 4) != 0) throw BadMagic("not a weights container");
  const auto version = cur.u32();
  if (version != kWeightsVersion) {
    throw SchemaError("unsupported weights container version " + std::to_string(version));
  }
  const auto cfg_bytes = cur.take(cur.u32());
  NetworkConfig config;
  try {
    config = nlohmann::json::parse(cfg_bytes.begin(), cfg_bytes.end()).get<NetworkConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("weights config: ") + e.what());
  }
  Weights<T> w(config);
  const auto count = cur.u32();
  if (count != w.blocks().size()) {
    throw SchemaError("weights container has " + std::to_string(count) + " blocks, config implies " +
                      std::to_string(w.blocks().size()));
  }
  for (auto& b : w.blocks()) {
    const auto name = cur.take(cur.u32());
    if (std::string(name.begin(), name.end()) != b.name) {
      throw SchemaError("expected block '" + b.name + "', found '" + std::string(name.begin(), name.end()) + "'");
    }
    const auto ndim = cur.u32();
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = cur.u32();
    if (shape != b.shape) throw SchemaError("block '" + b.name + "' has the wrong shape");
    for (auto& v : b.values) v = static_cast<T>(std::bit_cast<float>(cur.u32()));
  }
  if (!cur.done()) throw SchemaError("trailing bytes after weights container");
  if (!w.all_finite()) throw SchemaError("weights contain non-finite values");
  return w;
}

template <typename T>
void save_weights(const std::filesystem::path& path, const Weights<T>& w) {
  nifti::write_file_bytes(path, serialize_weights(w));
}

template <typename T = float>
Weights<T> load_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such weights file: " + path.string());
  return deserialize_weights<T>(nifti::read_file_bytes(path));
}

}  // namespace volseg::segnet
