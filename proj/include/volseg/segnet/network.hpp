#pragma once

// Encoder / linear-attention bottleneck / decoder segmentation network.
//
//   level s < depth : conv block -> skip_s -> strided 2x2x2 conv (downsample)
//   bottleneck      : conv block -> tokens -> embed -> (+ linear attention)
//                     -> project back -> residual add
//   level s < depth : transposed 2x2x2 conv (upsample) -> concat skip_s -> conv block
//   head            : 1x1x1 conv to class scores
//
// conv block = 3x3x3 conv -> instance norm -> leaky ReLU.

#include <string>
#include <vector>

#include "volseg/error.hpp"
#include "volseg/segnet/attention.hpp"
#include "volseg/segnet/config.hpp"
#include "volseg/segnet/layers.hpp"
#include "volseg/segnet/tensor.hpp"
#include "volseg/segnet/weights.hpp"

namespace volseg::segnet {

template <typename T>
struct ConvBlockCache {
  Tensor<T> in;
  NormCache<T> norm;
  Tensor<T> pre;  // pre-activation
};

template <typename T>
struct ForwardCache {
  std::vector<ConvBlockCache<T>> enc;
  std::vector<Tensor<T>> skip;
  std::vector<Tensor<T>> down_out;
  ConvBlockCache<T> bottleneck;
  Tensor<T> bottleneck_out;
  Matrix<T> tokens;    // n x C
  Matrix<T> embedded;  // n x D
  LinearAttentionCache<T> attention;
  Matrix<T> mixed;     // embedded + attention, n x D
  std::vector<Tensor<T>> up_in;  // indexed by level
  std::vector<ConvBlockCache<T>> dec;
  Tensor<T> head_in;
};

template <typename T>
Matrix<T> tensor_to_tokens(const Tensor<T>& t) {
  Matrix<T> m(t.voxels(), t.channels());
  for (std::size_t c = 0; c < t.channels(); ++c) {
    const T* x = t.channel(c);
    for (std::size_t i = 0; i < t.voxels(); ++i) m(i, c) = x[i];
  }
  return m;
}

template <typename T>
void add_tokens_to_tensor(const Matrix<T>& m, Tensor<T>& t) {
  for (std::size_t c = 0; c < t.channels(); ++c) {
    T* x = t.channel(c);
    for (std::size_t i = 0; i < t.voxels(); ++i) x[i] += m(i, c);
  }
}

template <typename T>
class SegNet {
 public:
  SegNet(const NetworkConfig& config, const Weights<T>& weights) : config_(config), w_(weights) {
    config_.validate();
  }

  const NetworkConfig& config() const noexcept { return config_; }

  /// Class scores (num_classes x patch) for a single-channel patch.
  Tensor<T> forward(const Tensor<T>& input) const {
    ForwardCache<T> cache;
    return forward(input, cache);
  }

  Tensor<T> forward(const Tensor<T>& input, ForwardCache<T>& cache) const {
    if (input.channels() != 1 || input.dims() != config_.patch_size) {
      throw ShapeMismatch("input patch " + shape_string(input.dims()) + " x" + std::to_string(input.channels()) +
                          " does not match configured patch " + shape_string(config_.patch_size) + " x1");
    }
    const std::size_t depth = config_.depth;
    cache.enc.resize(depth);
    cache.skip.resize(depth);
    cache.down_out.resize(depth);
    cache.up_in.resize(depth);
    cache.dec.resize(depth);

    Tensor<T> x = input;
    for (std::size_t s = 0; s < depth; ++s) {
      const auto tag = std::to_string(s);
      cache.skip[s] = conv_block("enc" + tag, x, config_.channels(s), cache.enc[s]);
      x = down_forward<T>(cache.skip[s], w_["down" + tag + ".w"], w_["down" + tag + ".b"]);
      cache.down_out[s] = x;
    }

    const std::size_t cb = config_.channels(depth);
    Tensor<T> b = conv_block("bottleneck", x, cb, cache.bottleneck);
    cache.bottleneck_out = b;
    cache.tokens = tensor_to_tokens(b);
    cache.embedded = matmul_bt(cache.tokens, matrix("attn.embed.w"));
    const auto attn = attention_weights();
    const Matrix<T> a = linear_attention(cache.embedded, attn, &cache.attention);
    cache.mixed = cache.embedded;
    for (std::size_t i = 0; i < a.data.size(); ++i) cache.mixed.data[i] += a.data[i];
    add_tokens_to_tensor(matmul_bt(cache.mixed, matrix("attn.proj.w")), b);

    for (std::size_t s = depth; s-- > 0;) {
      const auto tag = std::to_string(s);
      cache.up_in[s] = b;
      Tensor<T> up = up_forward<T>(b, w_["up" + tag + ".w"], w_["up" + tag + ".b"]);
      b = conv_block("dec" + tag, concat_channels(up, cache.skip[s]), config_.channels(s), cache.dec[s]);
    }
    cache.head_in = b;
    return pointwise_forward<T>(b, w_["head.w"], w_["head.b"]);
  }

  /// Parameter gradients of a scalar loss given d(loss)/d(scores).
  Weights<T> backward(const ForwardCache<T>& cache, const Tensor<T>& dscores) const {
    Weights<T> g = w_.zeros_like();
    backward(cache, dscores, g);
    return g;
  }

  void backward(const ForwardCache<T>& cache, const Tensor<T>& dscores, Weights<T>& g) const {
    const std::size_t depth = config_.depth;
    Tensor<T> d = pointwise_backward<T>(cache.head_in, w_["head.w"], dscores, g["head.w"], g["head.b"]);

    std::vector<Tensor<T>> dskip(depth);
    for (std::size_t s = 0; s < depth; ++s) {
      const auto tag = std::to_string(s);
      Tensor<T> dcat = conv_block_backward("dec" + tag, cache.dec[s], d, g);
      // Split concat gradient: first half is the upsampled path, second the skip.
      const std::size_t cs = config_.channels(s);
      Tensor<T> dup(cs, dcat.dims());
      dskip[s] = Tensor<T>(cs, dcat.dims());
      std::copy(dcat.vec().begin(), dcat.vec().begin() + static_cast<std::ptrdiff_t>(dup.size()), dup.vec().begin());
      std::copy(dcat.vec().begin() + static_cast<std::ptrdiff_t>(dup.size()), dcat.vec().end(),
                dskip[s].vec().begin());
      Tensor<T> dprev = cache.up_in[s].zeros_like();
      up_backward<T>(cache.up_in[s], w_["up" + tag + ".w"], dup, dprev, g["up" + tag + ".w"], g["up" + tag + ".b"]);
      d = std::move(dprev);
    }

    // Bottleneck: out = b + proj(embed(b) + attn(embed(b)))
    Tensor<T> db = d;
    const Matrix<T> dproj_out = tensor_to_tokens(d);
    Matrix<T> dmixed(cache.mixed.rows, cache.mixed.cols);
    Matrix<T> gproj = grad_matrix(g, "attn.proj.w");
    matmul_bt_backward(cache.mixed, matrix("attn.proj.w"), dproj_out, &dmixed, &gproj);
    store_grad(g, "attn.proj.w", gproj);

    const auto attn = attention_weights();
    AttentionGrads<T> ag{grad_matrix(g, "attn.q.w"), grad_matrix(g, "attn.k.w"), grad_matrix(g, "attn.v.w"),
                         grad_matrix(g, "attn.o.w")};
    Matrix<T> dembedded = linear_attention_backward(cache.attention, attn, dmixed, ag);
    for (std::size_t i = 0; i < dembedded.data.size(); ++i) dembedded.data[i] += dmixed.data[i];
    store_grad(g, "attn.q.w", ag.wq);
    store_grad(g, "attn.k.w", ag.wk);
    store_grad(g, "attn.v.w", ag.wv);
    store_grad(g, "attn.o.w", ag.wo);

    Matrix<T> dtokens(cache.tokens.rows, cache.tokens.cols);
    Matrix<T> gembed = grad_matrix(g, "attn.embed.w");
    matmul_bt_backward(cache.tokens, matrix("attn.embed.w"), dembedded, &dtokens, &gembed);
    store_grad(g, "attn.embed.w", gembed);
    add_tokens_to_tensor(dtokens, db);

    d = conv_block_backward("bottleneck", cache.bottleneck, db, g);

    for (std::size_t s = depth; s-- > 0;) {
      const auto tag = std::to_string(s);
      Tensor<T> dskip_total = dskip[s];
      down_backward<T>(cache.skip[s], w_["down" + tag + ".w"], d, dskip_total, g["down" + tag + ".w"],
                       g["down" + tag + ".b"]);
      d = conv_block_backward("enc" + tag, cache.enc[s], dskip_total, g);
    }
  }

 private:
  static std::string shape_string(const Shape3& s) {
    return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
  }

  Tensor<T> conv_block(const std::string& prefix, const Tensor<T>& in, std::size_t cout,
                       ConvBlockCache<T>& cache) const {
    cache.in = in;
    const Tensor<T> conv = conv3_forward<T>(in, w_[prefix + ".conv.w"], cout);
    cache.pre = instance_norm_forward<T>(conv, w_[prefix + ".norm.gamma"], w_[prefix + ".norm.beta"], cache.norm);
    return leaky_relu_forward(cache.pre);
  }

  // Returns d(block input).
  Tensor<T> conv_block_backward(const std::string& prefix, const ConvBlockCache<T>& cache, const Tensor<T>& dout,
                                Weights<T>& g) const {
    const Tensor<T> dpre = leaky_relu_backward(cache.pre, dout);
    const Tensor<T> dconv = instance_norm_backward<T>(cache.norm, w_[prefix + ".norm.gamma"], dpre,
                                                      g[prefix + ".norm.gamma"], g[prefix + ".norm.beta"]);
    Tensor<T> din = cache.in.zeros_like();
    conv3_backward<T>(cache.in, w_[prefix + ".conv.w"], dconv, &din, g[prefix + ".conv.w"]);
    return din;
  }

  Matrix<T> matrix(const std::string& name) const {
    const auto& b = w_.block(name);
    return Matrix<T>(b.shape[0], b.shape[1], b.values);
  }

  static Matrix<T> grad_matrix(const Weights<T>& g, const std::string& name) {
    const auto& b = g.block(name);
    return Matrix<T>(b.shape[0], b.shape[1], b.values);
  }

  static void store_grad(Weights<T>& g, const std::string& name, const Matrix<T>& m) {
    g.block(name).values = m.data;
  }

  AttentionWeights<T> attention_weights() const {
    return {matrix("attn.q.w"), matrix("attn.k.w"), matrix("attn.v.w"), matrix("attn.o.w"), config_.attention_heads};
  }

  NetworkConfig config_;
  const Weights<T>& w_;
};

}  // namespace volseg::segnet
