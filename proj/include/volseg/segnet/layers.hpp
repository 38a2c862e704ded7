#pragma once

// Volumetric layers with explicit backward passes. Backward functions
// accumulate (+=) into parameter and input gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "volseg/error.hpp"
#include "volseg/segnet/tensor.hpp"

namespace volseg::segnet {

namespace detail {

// Calls fn(out_row, in_row, x_begin, x_end) over every (z, y) row where the
// input shifted by (dx, dy, dz) overlaps the output, for one channel pair.
template <typename Fn>
void for_shifted_rows(const Shape3& d, int dx, int dy, int dz, Fn&& fn) {
  const auto nx = static_cast<std::ptrdiff_t>(d[0]);
  const auto ny = static_cast<std::ptrdiff_t>(d[1]);
  const auto nz = static_cast<std::ptrdiff_t>(d[2]);
  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(nx, nx - dx);
  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(ny, ny - dy);
  const std::ptrdiff_t z0 = std::max<std::ptrdiff_t>(0, -dz), z1 = std::min(nz, nz - dz);
  if (x0 >= x1) return;
  for (std::ptrdiff_t z = z0; z < z1; ++z) {
    for (std::ptrdiff_t y = y0; y < y1; ++y) {
      const std::ptrdiff_t out_row = (z * ny + y) * nx;
      const std::ptrdiff_t in_row = ((z + dz) * ny + (y + dy)) * nx + dx;
      fn(out_row, in_row, x0, x1);
    }
  }
}

}  // namespace detail

/// 3x3x3 convolution, stride 1, zero padding 1, no bias. w is [cout, cin, 27]
/// with tap index (kz * 3 + ky) * 3 + kx.
template <typename T>
Tensor<T> conv3_forward(const Tensor<T>& in, std::span<const T> w, std::size_t cout) {
  const std::size_t cin = in.channels();
  if (w.size() != cout * cin * 27) throw ShapeMismatch("conv3 weight shape");
  Tensor<T> out(cout, in.dims());
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out.channel(co);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      for (int t = 0; t < 27; ++t) {
        const T wv = w[(co * cin + ci) * 27 + static_cast<std::size_t>(t)];
        detail::for_shifted_rows(in.dims(), t % 3 - 1, (t / 3) % 3 - 1, t / 9 - 1,
                                 [&](std::ptrdiff_t orow, std::ptrdiff_t irow, std::ptrdiff_t a, std::ptrdiff_t b) {
                                   T* op = o + orow;
                                   const T* xp = x + irow;
                                   for (std::ptrdiff_t i = a; i < b; ++i) op[i] += wv * xp[i];
                                 });
      }
    }
  }
  return out;
}

template <typename T>
void conv3_backward(const Tensor<T>& in, std::span<const T> w, const Tensor<T>& dout, Tensor<T>* din,
                    std::span<T> dw) {
  const std::size_t cin = in.channels(), cout = dout.channels();
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g = dout.channel(co);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      T* dx = din ? din->channel(ci) : nullptr;
      for (int t = 0; t < 27; ++t) {
        const std::size_t widx = (co * cin + ci) * 27 + static_cast<std::size_t>(t);
        const T wv = w[widx];
        double acc = 0;
        detail::for_shifted_rows(in.dims(), t % 3 - 1, (t / 3) % 3 - 1, t / 9 - 1,
                                 [&](std::ptrdiff_t orow, std::ptrdiff_t irow, std::ptrdiff_t a, std::ptrdiff_t b) {
                                   const T* gp = g + orow;
                                   const T* xp = x + irow;
                                   T row_acc = 0;
                                   for (std::ptrdiff_t i = a; i < b; ++i) row_acc += gp[i] * xp[i];
                                   acc += row_acc;
                                   if (dx) {
                                     T* dp = dx + irow;
                                     for (std::ptrdiff_t i = a; i < b; ++i) dp[i] += wv * gp[i];
                                   }
                                 });
        dw[widx] += static_cast<T>(acc);
      }
    }
  }
}

/// 2x2x2 convolution with stride 2 (halves each axis). w is [cout, cin, 8].
template <typename T>
Tensor<T> down_forward(const Tensor<T>& in, std::span<const T> w, std::span<const T> bias) {
  const std::size_t cin = in.channels(), cout = bias.size();
  const Shape3 d = in.dims();
  const Shape3 h{d[0] / 2, d[1] / 2, d[2] / 2};
  Tensor<T> out(cout, h);
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + out.voxels(), bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      for (std::size_t t = 0; t < 8; ++t) {
        const T wv = w[(co * cin + ci) * 8 + t];
        const std::size_t kx = t & 1, ky = (t >> 1) & 1, kz = t >> 2;
        for (std::size_t z = 0; z < h[2]; ++z) {
          for (std::size_t y = 0; y < h[1]; ++y) {
            T* op = o + (z * h[1] + y) * h[0];
            const T* xp = x + ((2 * z + kz) * d[1] + (2 * y + ky)) * d[0] + kx;
            for (std::size_t i = 0; i < h[0]; ++i) op[i] += wv * xp[2 * i];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void down_backward(const Tensor<T>& in, std::span<const T> w, const Tensor<T>& dout, Tensor<T>& din,
                   std::span<T> dw, std::span<T> db) {
  const std::size_t cin = in.channels(), cout = dout.channels();
  const Shape3 d = in.dims();
  const Shape3 h = dout.dims();
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g = dout.channel(co);
    double bsum = 0;
    for (std::size_t i = 0; i < dout.voxels(); ++i) bsum += g[i];
    db[co] += static_cast<T>(bsum);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      T* dx = din.channel(ci);
      for (std::size_t t = 0; t < 8; ++t) {
        const std::size_t widx = (co * cin + ci) * 8 + t;
        const T wv = w[widx];
        const std::size_t kx = t & 1, ky = (t >> 1) & 1, kz = t >> 2;
        double acc = 0;
        for (std::size_t z = 0; z < h[2]; ++z) {
          for (std::size_t y = 0; y < h[1]; ++y) {
            const T* gp = g + (z * h[1] + y) * h[0];
            const std::size_t base = ((2 * z + kz) * d[1] + (2 * y + ky)) * d[0] + kx;
            for (std::size_t i = 0; i < h[0]; ++i) {
              acc += gp[i] * x[base + 2 * i];
              dx[base + 2 * i] += wv * gp[i];
            }
          }
        }
        dw[widx] += static_cast<T>(acc);
      }
    }
  }
}

/// 2x2x2 transposed convolution with stride 2 (doubles each axis). w is [cin, cout, 8].
template <typename T>
Tensor<T> up_forward(const Tensor<T>& in, std::span<const T> w, std::span<const T> bias) {
  const std::size_t cin = in.channels(), cout = bias.size();
  const Shape3 h = in.dims();
  const Shape3 d{h[0] * 2, h[1] * 2, h[2] * 2};
  Tensor<T> out(cout, d);
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + out.voxels(), bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      for (std::size_t t = 0; t < 8; ++t) {
        const T wv = w[(ci * cout + co) * 8 + t];
        const std::size_t kx = t & 1, ky = (t >> 1) & 1, kz = t >> 2;
        for (std::size_t z = 0; z < h[2]; ++z) {
          for (std::size_t y = 0; y < h[1]; ++y) {
            const T* xp = x + (z * h[1] + y) * h[0];
            T* op = o + ((2 * z + kz) * d[1] + (2 * y + ky)) * d[0] + kx;
            for (std::size_t i = 0; i < h[0]; ++i) op[2 * i] += wv * xp[i];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void up_backward(const Tensor<T>& in, std::span<const T> w, const Tensor<T>& dout, Tensor<T>& din,
                 std::span<T> dw, std::span<T> db) {
  const std::size_t cin = in.channels(), cout = dout.channels();
  const Shape3 h = in.dims();
  const Shape3 d = dout.dims();
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g = dout.channel(co);
    double bsum = 0;
    for (std::size_t i = 0; i < dout.voxels(); ++i) bsum += g[i];
    db[co] += static_cast<T>(bsum);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      T* dx = din.channel(ci);
      for (std::size_t t = 0; t < 8; ++t) {
        const std::size_t widx = (ci * cout + co) * 8 + t;
        const T wv = w[widx];
        const std::size_t kx = t & 1, ky = (t >> 1) & 1, kz = t >> 2;
        double acc = 0;
        for (std::size_t z = 0; z < h[2]; ++z) {
          for (std::size_t y = 0; y < h[1]; ++y) {
            const std::size_t row = (z * h[1] + y) * h[0];
            const T* gp = g + ((2 * z + kz) * d[1] + (2 * y + ky)) * d[0] + kx;
            for (std::size_t i = 0; i < h[0]; ++i) {
              acc += gp[2 * i] * x[row + i];
              dx[row + i] += wv * gp[2 * i];
            }
          }
        }
        dw[widx] += static_cast<T>(acc);
      }
    }
  }
}

/// Per-channel instance normalisation with learned gain and shift.
template <typename T>
struct NormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

inline constexpr double kNormEpsilon = 1e-5;

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                                NormCache<T>& cache) {
  const std::size_t n = in.voxels();
  Tensor<T> out(in.channels(), in.dims());
  cache.xhat = Tensor<T>(in.channels(), in.dims());
  cache.inv_std.assign(in.channels(), T(0));
  for (std::size_t c = 0; c < in.channels(); ++c) {
    const T* x = in.channel(c);
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
    cache.inv_std[c] = static_cast<T>(inv);
    T* xh = cache.xhat.channel(c);
    T* o = out.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      xh[i] = static_cast<T>((x[i] - mean) * inv);
      o[i] = gamma[c] * xh[i] + beta[c];
    }
  }
  return out;
}

template <typename T>
Tensor<T> instance_norm_backward(const NormCache<T>& cache, std::span<const T> gamma, const Tensor<T>& dout,
                                 std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t n = dout.voxels();
  Tensor<T> din(dout.channels(), dout.dims());
  for (std::size_t c = 0; c < dout.channels(); ++c) {
    const T* g = dout.channel(c);
    const T* xh = cache.xhat.channel(c);
    double sg = 0, sgx = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sg += g[i];
      sgx += g[i] * xh[i];
    }
    dgamma[c] += static_cast<T>(sgx);
    dbeta[c] += static_cast<T>(sg);
    const double mg = gamma[c] * sg / static_cast<double>(n);
    const double mgx = gamma[c] * sgx / static_cast<double>(n);
    T* dx = din.channel(c);
    for (std::size_t i = 0; i < n; ++i) {
      dx[i] = static_cast<T>(cache.inv_std[c] * (gamma[c] * g[i] - mg - xh[i] * mgx));
    }
  }
  return din;
}

inline constexpr double kLeakySlope = 0.01;

template <typename T>
Tensor<T> leaky_relu_forward(const Tensor<T>& in) {
  Tensor<T> out = in;
  for (auto& v : out.vec()) v = v > T(0) ? v : static_cast<T>(kLeakySlope) * v;
  return out;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& pre, const Tensor<T>& dout) {
  Tensor<T> din = dout;
  for (std::size_t i = 0; i < din.size(); ++i) {
    if (!(pre.vec()[i] > T(0))) din.vec()[i] *= static_cast<T>(kLeakySlope);
  }
  return din;
}

/// 1x1x1 convolution with bias; w is [cout, cin].
template <typename T>
Tensor<T> pointwise_forward(const Tensor<T>& in, std::span<const T> w, std::span<const T> bias) {
  const std::size_t cin = in.channels(), cout = bias.size(), n = in.voxels();
  Tensor<T> out(cout, in.dims());
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out.channel(co);
    std::fill(o, o + n, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T wv = w[co * cin + ci];
      const T* x = in.channel(ci);
      for (std::size_t i = 0; i < n; ++i) o[i] += wv * x[i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> pointwise_backward(const Tensor<T>& in, std::span<const T> w, const Tensor<T>& dout, std::span<T> dw,
                             std::span<T> db) {
  const std::size_t cin = in.channels(), cout = dout.channels(), n = in.voxels();
  Tensor<T> din(cin, in.dims());
  for (std::size_t co = 0; co < cout; ++co) {
    const T* g = dout.channel(co);
    double bsum = 0;
    for (std::size_t i = 0; i < n; ++i) bsum += g[i];
    db[co] += static_cast<T>(bsum);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* x = in.channel(ci);
      T* dx = din.channel(ci);
      const T wv = w[co * cin + ci];
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += g[i] * x[i];
        dx[i] += wv * g[i];
      }
      dw[co * cin + ci] += static_cast<T>(acc);
    }
  }
  return din;
}

}  // namespace volseg::segnet
