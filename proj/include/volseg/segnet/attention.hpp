#pragma once

// Kernelized linear self-attention with feature map phi(x) = elu(x) + 1.
//
// Per head, with a_i = phi(q_i) and b_j = phi(k_j):
//   S = sum_j b_j v_j^T,  z = sum_j b_j,  out_i = S^T a_i / (a_i . z)
// which costs O(n d^2) and never forms the n x n attention matrix.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "volseg/error.hpp"

namespace volseg::segnet {

/// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}
  Matrix(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw ShapeMismatch("matrix data does not match shape");
  }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
  T operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }
  T* row(std::size_t i) noexcept { return data.data() + i * cols; }
  const T* row(std::size_t i) const noexcept { return data.data() + i * cols; }
};

/// Y = X W^T for W stored as [out, in].
template <typename T>
Matrix<T> matmul_bt(const Matrix<T>& x, const Matrix<T>& w) {
  if (x.cols != w.cols) throw ShapeMismatch("matmul: inner dimensions differ");
  Matrix<T> y(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const T* xi = x.row(i);
    T* yi = y.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const T* wo = w.row(o);
      T acc = 0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += xi[k] * wo[k];
      yi[o] = acc;
    }
  }
  return y;
}

/// Backward of Y = X W^T: dX += dY W, dW += dY^T X.
template <typename T>
void matmul_bt_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& dy, Matrix<T>* dx,
                        Matrix<T>* dw) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const T* xi = x.row(i);
    const T* gi = dy.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const T g = gi[o];
      if (g == T(0)) continue;
      const T* wo = w.row(o);
      if (dx) {
        T* dxi = dx->row(i);
        for (std::size_t k = 0; k < x.cols; ++k) dxi[k] += g * wo[k];
      }
      if (dw) {
        T* dwo = dw->row(o);
        for (std::size_t k = 0; k < x.cols; ++k) dwo[k] += g * xi[k];
      }
    }
  }
}

template <typename T>
inline T elu_plus_one(T x) {
  return x > T(0) ? x + T(1) : std::exp(x);
}

template <typename T>
inline T elu_plus_one_grad(T x) {
  return x > T(0) ? T(1) : std::exp(x);
}

/// Intermediates kept by the forward pass for backpropagation.
template <typename T>
struct AttentionKernelCache {
  std::size_t heads = 1;
  Matrix<T> q, k, v;
  Matrix<T> out;
  std::vector<T> kv;   // heads x dh x dh
  std::vector<T> ksum; // heads x dh
  std::vector<T> den;  // n x heads
};

/// Multi-head linear attention on projected queries/keys/values (each n x d).
/// Heads split the d columns evenly; outputs are concatenated per head.
template <typename T>
Matrix<T> linear_attention_kernel(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                  std::size_t heads, AttentionKernelCache<T>* cache = nullptr) {
  const std::size_t n = q.rows, d = q.cols;
  if (n == 0) throw ShapeMismatch("attention needs at least one token");
  if (k.rows != n || v.rows != n || k.cols != d || v.cols != d) {
    throw ShapeMismatch("q, k, v shapes differ");
  }
  if (heads == 0 || d % heads != 0) throw ShapeMismatch("attention dim not divisible by heads");
  const std::size_t dh = d / heads;
  Matrix<T> out(n, d);
  std::vector<T> kv(heads * dh * dh, T(0)), ksum(heads * dh, T(0)), den(n * heads, T(0));
  std::vector<T> a(dh), b(dh);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    T* s = kv.data() + h * dh * dh;
    T* z = ksum.data() + h * dh;
    for (std::size_t j = 0; j < n; ++j) {
      const T* kj = k.row(j) + c0;
      const T* vj = v.row(j) + c0;
      for (std::size_t r = 0; r < dh; ++r) {
        const T br = elu_plus_one(kj[r]);
        z[r] += br;
        for (std::size_t c = 0; c < dh; ++c) s[r * dh + c] += br * vj[c];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const T* qi = q.row(i) + c0;
      for (std::size_t r = 0; r < dh; ++r) a[r] = elu_plus_one(qi[r]);
      T dn = 0;
      for (std::size_t r = 0; r < dh; ++r) dn += a[r] * z[r];
      den[i * heads + h] = dn;
      T* oi = out.row(i) + c0;
      for (std::size_t c = 0; c < dh; ++c) {
        T num = 0;
        for (std::size_t r = 0; r < dh; ++r) num += a[r] * s[r * dh + c];
        oi[c] = num / dn;
      }
    }
  }
  if (cache) {
    cache->heads = heads;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->out = out;
    cache->kv = std::move(kv);
    cache->ksum = std::move(ksum);
    cache->den = std::move(den);
  }
  return out;
}

/// Gradients of the kernel with respect to q, k and v.
template <typename T>
void linear_attention_kernel_backward(const AttentionKernelCache<T>& c, const Matrix<T>& dout,
                                      Matrix<T>& dq, Matrix<T>& dk, Matrix<T>& dv) {
  const std::size_t n = c.q.rows, d = c.q.cols, heads = c.heads, dh = d / heads;
  dq = Matrix<T>(n, d);
  dk = Matrix<T>(n, d);
  dv = Matrix<T>(n, d);
  std::vector<T> ds(dh * dh), dz(dh), a(dh), dnum(dh);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t c0 = h * dh;
    const T* s = c.kv.data() + h * dh * dh;
    const T* z = c.ksum.data() + h * dh;
    std::fill(ds.begin(), ds.end(), T(0));
    std::fill(dz.begin(), dz.end(), T(0));
    for (std::size_t i = 0; i < n; ++i) {
      const T* qi = c.q.row(i) + c0;
      const T* gi = dout.row(i) + c0;
      const T* oi = c.out.row(i) + c0;
      const T dn = c.den[i * heads + h];
      T go = 0;
      for (std::size_t col = 0; col < dh; ++col) {
        dnum[col] = gi[col] / dn;
        go += gi[col] * oi[col];
      }
      const T dden = -go / dn;
      for (std::size_t r = 0; r < dh; ++r) a[r] = elu_plus_one(qi[r]);
      T* dqi = dq.row(i) + c0;
      for (std::size_t r = 0; r < dh; ++r) {
        T da = z[r] * dden;
        for (std::size_t col = 0; col < dh; ++col) {
          da += s[r * dh + col] * dnum[col];
          ds[r * dh + col] += a[r] * dnum[col];
        }
        dz[r] += a[r] * dden;
        dqi[r] = da * elu_plus_one_grad(qi[r]);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      const T* kj = c.k.row(j) + c0;
      const T* vj = c.v.row(j) + c0;
      T* dkj = dk.row(j) + c0;
      T* dvj = dv.row(j) + c0;
      for (std::size_t r = 0; r < dh; ++r) {
        const T br = elu_plus_one(kj[r]);
        T db = dz[r];
        for (std::size_t col = 0; col < dh; ++col) {
          db += ds[r * dh + col] * vj[col];
          dvj[col] += br * ds[r * dh + col];
        }
        dkj[r] = db * elu_plus_one_grad(kj[r]);
      }
    }
  }
}

/// Q/K/V/output projections of one attention layer, each [d, d].
template <typename T>
struct AttentionWeights {
  Matrix<T> wq, wk, wv, wo;
  std::size_t heads = 1;
};

template <typename T>
struct LinearAttentionCache {
  Matrix<T> tokens;
  AttentionKernelCache<T> kernel;
};

/// Full attention layer on n x d tokens: project, attend per head, concatenate,
/// output-project. Returns n x d.
template <typename T>
Matrix<T> linear_attention(const Matrix<T>& tokens, const AttentionWeights<T>& w,
                           LinearAttentionCache<T>* cache = nullptr) {
  if (tokens.cols != w.wq.cols) {
    throw ShapeMismatch("token width " + std::to_string(tokens.cols) + " != attention dim " +
                        std::to_string(w.wq.cols));
  }
  const auto q = matmul_bt(tokens, w.wq);
  const auto k = matmul_bt(tokens, w.wk);
  const auto v = matmul_bt(tokens, w.wv);
  Matrix<T> attended;
  if (cache) {
    cache->tokens = tokens;
    attended = linear_attention_kernel(q, k, v, w.heads, &cache->kernel);
  } else {
    attended = linear_attention_kernel(q, k, v, w.heads);
  }
  return matmul_bt(attended, w.wo);
}

template <typename T>
struct AttentionGrads {
  Matrix<T> wq, wk, wv, wo;
};

/// Accumulates weight gradients into `g` and returns d(tokens).
template <typename T>
Matrix<T> linear_attention_backward(const LinearAttentionCache<T>& c, const AttentionWeights<T>& w,
                                    const Matrix<T>& dout, AttentionGrads<T>& g) {
  Matrix<T> dattended(dout.rows, w.wo.cols);
  matmul_bt_backward(c.kernel.out, w.wo, dout, &dattended, &g.wo);
  Matrix<T> dq, dk, dv;
  linear_attention_kernel_backward(c.kernel, dattended, dq, dk, dv);
  Matrix<T> dtokens(c.tokens.rows, c.tokens.cols);
  matmul_bt_backward(c.tokens, w.wq, dq, &dtokens, &g.wq);
  matmul_bt_backward(c.tokens, w.wk, dk, &dtokens, &g.wk);
  matmul_bt_backward(c.tokens, w.wv, dv, &dtokens, &g.wv);
  return dtokens;
}

}  // namespace volseg::segnet
