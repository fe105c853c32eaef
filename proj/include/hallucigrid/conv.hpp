#pragma once
// 3x3 stride-1 zero-padding-1 convolution kernels for NCHW planes, plus the
// two backward products. Single-threaded. Float gets register-tiled fast paths
// for the plane widths the networks actually use; everything else (and all
// double work) goes through the generic path. Accumulation order is fixed, so
// results are bit-reproducible run to run.

#include <cstring>
#include <vector>

#include "hallucigrid/tensor.hpp"

namespace hg::conv {

// ---------------------------------------------------------------------------
// generic path: any scalar, any plane size
// ---------------------------------------------------------------------------

template <typename T, bool Accumulate>
void conv3x3_generic(const T* x, int ci_n, int h, int w, const T* weights, const T* bias,
                     T* y, int co_n) {
  const size_t hw = static_cast<size_t>(h) * w;
  for (int co = 0; co < co_n; ++co) {
    T* yp = y + co * hw;
    if constexpr (!Accumulate) {
      const T b = bias ? bias[co] : T(0);
      for (size_t i = 0; i < hw; ++i) yp[i] = b;
    }
    for (int ci = 0; ci < ci_n; ++ci) {
      const T* xp = x + ci * hw;
      const T* wk = weights + (static_cast<size_t>(co) * ci_n + ci) * 9;
      for (int yy = 0; yy < h; ++yy)
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = yy + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* xrow = xp + static_cast<size_t>(sy) * w;
          T* yrow = yp + static_cast<size_t>(yy) * w;
          const T w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
          yrow[0] += w1 * xrow[0] + (w >= 2 ? w2 * xrow[1] : T(0));
          for (int xx = 1; xx < w - 1; ++xx)
            yrow[xx] += w0 * xrow[xx - 1] + w1 * xrow[xx] + w2 * xrow[xx + 1];
          if (w >= 2) yrow[w - 1] += w0 * xrow[w - 2] + w1 * xrow[w - 1];
        }
    }
  }
}

// ---------------------------------------------------------------------------
// float fast path: C output channels x RY rows held in registers, padded row
// buffers remove all edge branches from the inner loops
// ---------------------------------------------------------------------------

namespace detail {

template <int C, int W, int RY, bool Accumulate>
void conv_row_tile(const float* x, int ci_n, int h, const float* weights, const float* bias,
                   float* y, int co_n, int co0, int y0) {
  const size_t hw = static_cast<size_t>(h) * W;
  float acc[C][RY][W];
  for (int b = 0; b < C; ++b) {
    const float init = (!Accumulate && bias) ? bias[co0 + b] : 0.0f;
    for (int ry = 0; ry < RY; ++ry)
      for (int xx = 0; xx < W; ++xx) acc[b][ry][xx] = init;
  }
  float xpad[RY + 2][W + 2];
  for (int ci = 0; ci < ci_n; ++ci) {
    const float* xp = x + ci * hw;
    for (int r = 0; r < RY + 2; ++r) {
      const int sy = y0 + r - 1;
      if (sy < 0 || sy >= h) {
        std::memset(xpad[r], 0, sizeof(float) * (W + 2));
        continue;
      }
      xpad[r][0] = 0.0f;
      xpad[r][W + 1] = 0.0f;
      std::memcpy(xpad[r] + 1, xp + static_cast<size_t>(sy) * W, sizeof(float) * W);
    }
    for (int b = 0; b < C; ++b) {
      const float* wk = weights + (static_cast<size_t>(co0 + b) * ci_n + ci) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const float wv = wk[ky * 3 + kx];
          for (int ry = 0; ry < RY; ++ry) {
            const float* src = xpad[ry + ky] + kx;
            for (int xx = 0; xx < W; ++xx) acc[b][ry][xx] += wv * src[xx];
          }
        }
    }
  }
  for (int b = 0; b < C; ++b)
    for (int ry = 0; ry < RY; ++ry) {
      float* dst = y + (co0 + b) * hw + static_cast<size_t>(y0 + ry) * W;
      if constexpr (Accumulate)
        for (int xx = 0; xx < W; ++xx) dst[xx] += acc[b][ry][xx];
      else
        std::memcpy(dst, acc[b][ry], sizeof(float) * W);
    }
}

template <int C, int W, int RY, bool Accumulate>
void conv_plane_tiled(const float* x, int ci_n, int h, const float* weights, const float* bias,
                      float* y, int co_n) {
  int co = 0;
  for (; co + C <= co_n; co += C) {
    int yy = 0;
    for (; yy + RY <= h; yy += RY)
      conv_row_tile<C, W, RY, Accumulate>(x, ci_n, h, weights, bias, y, co_n, co, yy);
    for (; yy < h; ++yy)
      conv_row_tile<C, W, 1, Accumulate>(x, ci_n, h, weights, bias, y, co_n, co, yy);
  }
  for (; co < co_n; ++co) {
    int yy = 0;
    for (; yy + RY <= h; yy += RY)
      conv_row_tile<1, W, RY, Accumulate>(x, ci_n, h, weights, bias, y, co_n, co, yy);
    for (; yy < h; ++yy)
      conv_row_tile<1, W, 1, Accumulate>(x, ci_n, h, weights, bias, y, co_n, co, yy);
  }
}

}  // namespace detail

// Forward/accumulate convolution for one sample's plane group.
// y[co] = bias[co] + sum_ci x[ci] * k[co][ci]   (Accumulate: += without bias)
template <typename T, bool Accumulate = false>
void conv3x3(const T* x, int ci_n, int h, int w, const T* weights, const T* bias, T* y,
             int co_n) {
  if constexpr (std::is_same_v<T, float>) {
    switch (w) {
      case 64: detail::conv_plane_tiled<4, 64, 1, Accumulate>(x, ci_n, h, weights, bias, y, co_n); return;
      case 32: detail::conv_plane_tiled<4, 32, 1, Accumulate>(x, ci_n, h, weights, bias, y, co_n); return;
      case 16: detail::conv_plane_tiled<4, 16, 4, Accumulate>(x, ci_n, h, weights, bias, y, co_n); return;
      case 8:  detail::conv_plane_tiled<4, 8, 8, Accumulate>(x, ci_n, h, weights, bias, y, co_n); return;
      default: break;
    }
  }
  conv3x3_generic<T, Accumulate>(x, ci_n, h, w, weights, bias, y, co_n);
}

// Input gradient: dX[ci] += sum_co dY[co] conv rot180(k[co][ci]). Implemented
// by repacking the kernel bank to [ci][co] with flipped taps and reusing the
// forward kernels in accumulate mode. The repacked bank is per-call scratch.
template <typename T>
void conv3x3_backward_input(const T* dy, int co_n, int h, int w, const T* weights, T* dx,
                            int ci_n, std::vector<T>& repack_scratch) {
  repack_scratch.resize(static_cast<size_t>(ci_n) * co_n * 9);
  for (int ci = 0; ci < ci_n; ++ci)
    for (int co = 0; co < co_n; ++co) {
      const T* src = weights + (static_cast<size_t>(co) * ci_n + ci) * 9;
      T* dst = repack_scratch.data() + (static_cast<size_t>(ci) * co_n + co) * 9;
      for (int k = 0; k < 9; ++k) dst[k] = src[8 - k];
    }
  conv3x3<T, true>(dy, co_n, h, w, repack_scratch.data(), nullptr, dx, ci_n);
}

namespace detail {

// Lane-split dot product: fixed reassociation, vectorizes without fast-math.
template <typename T>
T dot_lanes(const T* a, const T* b, size_t n) {
  constexpr size_t L = std::is_same_v<T, float> ? 16 : 8;
  T lanes[L] = {};
  size_t i = 0;
  for (; i + L <= n; i += L)
    for (size_t j = 0; j < L; ++j) lanes[j] += a[i + j] * b[i + j];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  T sum = tail;
  for (size_t j = 0; j < L; ++j) sum += lanes[j];
  return sum;
}

// Float weight-gradient fast path: column-shifted plane copies make every tap
// a contiguous stream, and all nine taps accumulate in one pass over the data.
inline void conv_dw_fused(const float* x, int ci_n, const float* dy, int co_n, int h, int w,
                          float* dweights, std::vector<float>& scratch) {
  constexpr int VW = 16;
  const size_t hw = static_cast<size_t>(h) * w;
  scratch.resize(3 * hw);
  float* const sh[3] = {scratch.data(), scratch.data() + hw, scratch.data() + 2 * hw};
  for (int ci = 0; ci < ci_n; ++ci) {
    const float* xp = x + ci * hw;
    // sh[kx][y][x] = X[y][x + kx - 1], zero outside the row
    std::memcpy(sh[1], xp, sizeof(float) * hw);
    for (int yy = 0; yy < h; ++yy) {
      const float* row = xp + static_cast<size_t>(yy) * w;
      float* L = sh[0] + static_cast<size_t>(yy) * w;
      float* R = sh[2] + static_cast<size_t>(yy) * w;
      L[0] = 0.0f;
      std::memcpy(L + 1, row, sizeof(float) * (w - 1));
      std::memcpy(R, row + 1, sizeof(float) * (w - 1));
      R[w - 1] = 0.0f;
    }
    for (int co = 0; co < co_n; ++co) {
      const float* dyp = dy + static_cast<size_t>(co) * hw;
      float acc[9][VW];
      std::memset(acc, 0, sizeof(acc));
      // dY row y pairs with plane row y+ky-1; in the flat plane that is an
      // offset of +-w, so each tap is one long contiguous dot
      size_t i = 0;
      const size_t full = hw - w;  // h >= 1 so hw >= w
      for (; i + VW <= full; i += VW)
        for (int kx = 0; kx < 3; ++kx) {
          const float* s0 = sh[kx] + i;
          for (int v = 0; v < VW; ++v) {
            acc[0 * 3 + kx][v] += dyp[i + w + v] * s0[v];          // ky = 0
            acc[1 * 3 + kx][v] += dyp[i + v] * s0[v];              // ky = 1
            acc[2 * 3 + kx][v] += dyp[i + v] * sh[kx][i + w + v];  // ky = 2
          }
        }
      float tail[9] = {};
      for (; i < hw; ++i)
        for (int kx = 0; kx < 3; ++kx) {
          if (i < full) {
            tail[0 * 3 + kx] += dyp[i + w] * sh[kx][i];
            tail[2 * 3 + kx] += dyp[i] * sh[kx][i + w];
          }
          tail[1 * 3 + kx] += dyp[i] * sh[kx][i];
        }
      float* dwk = dweights + (static_cast<size_t>(co) * ci_n + ci) * 9;
      for (int k = 0; k < 9; ++k) {
        float s = tail[k];
        for (int v = 0; v < VW; ++v) s += acc[k][v];
        dwk[k] += s;
      }
    }
  }
}

}  // namespace detail

// Weight gradient: dW[co][ci][ky][kx] += sum_{y,x} dY[co][y][x] * X[ci][y+ky-1][x+kx-1]
// and dB[co] += sum dY[co]. Column-shifted copies of each input plane turn every
// tap into one contiguous dot product.
template <typename T>
void conv3x3_backward_weights(const T* x, int ci_n, const T* dy, int co_n, int h, int w,
                              T* dweights, T* dbias, std::vector<T>& shift_scratch) {
  const size_t hw = static_cast<size_t>(h) * w;
  if (dbias) {
    for (int co = 0; co < co_n; ++co) {
      const T* dyp = dy + co * hw;
      T s = T(0);
      constexpr size_t L = 8;
      T lanes[L] = {};
      size_t i = 0;
      for (; i + L <= hw; i += L)
        for (size_t j = 0; j < L; ++j) lanes[j] += dyp[i + j];
      for (; i < hw; ++i) s += dyp[i];
      for (size_t j = 0; j < L; ++j) s += lanes[j];
      dbias[co] += s;
    }
  }

  if constexpr (std::is_same_v<T, float>) {
    detail::conv_dw_fused(x, ci_n, dy, co_n, h, w, dweights, shift_scratch);
    return;
  }

  shift_scratch.resize(3 * hw);
  T* const shifted[3] = {shift_scratch.data(), shift_scratch.data() + hw,
                         shift_scratch.data() + 2 * hw};
  for (int ci = 0; ci < ci_n; ++ci) {
    const T* xp = x + ci * hw;
    // shifted[kx][y][x] = X[y][x + kx - 1], zero outside
    std::memcpy(shifted[1], xp, sizeof(T) * hw);
    for (int yy = 0; yy < h; ++yy) {
      const T* row = xp + static_cast<size_t>(yy) * w;
      T* L = shifted[0] + static_cast<size_t>(yy) * w;
      T* R = shifted[2] + static_cast<size_t>(yy) * w;
      L[0] = T(0);
      std::memcpy(L + 1, row, sizeof(T) * (w - 1));
      std::memcpy(R, row + 1, sizeof(T) * (w - 1));
      R[w - 1] = T(0);
    }
    for (int co = 0; co < co_n; ++co) {
      const T* dyp = dy + co * hw;
      T* dwk = dweights + (static_cast<size_t>(co) * ci_n + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int ry = ky - 1;  // dY[y] pairs with X[y + ry]
        const size_t dy_off = ry < 0 ? static_cast<size_t>(w) : 0;
        const size_t x_off = ry > 0 ? static_cast<size_t>(w) : 0;
        const size_t len = hw - (ry == 0 ? 0 : static_cast<size_t>(w));
        for (int kx = 0; kx < 3; ++kx)
          dwk[ky * 3 + kx] += detail::dot_lanes(dyp + dy_off, shifted[kx] + x_off, len);
      }
    }
  }
}

}  // namespace hg::conv
