#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dhrn/errors.hpp"
#include "dhrn/parallel.hpp"
#include "dhrn/tensor.hpp"

namespace dhrn {

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// 1-D convolution (cross-correlation, no kernel flip)
// ---------------------------------------------------------------------------

struct Conv1dParams {
  Tensor3 weight;               // (out_channels, in_channels, kernel)
  std::vector<double> bias;     // (out_channels)
  int stride = 1;
  int pad_left = 0;
  int pad_right = 0;

  int out_channels() const { return weight.n; }
  int in_channels() const { return weight.c; }
  int kernel() const { return weight.l; }
};

inline int conv1d_out_len(int in_len, int kernel, int stride, int pad_left, int pad_right) {
  return (in_len + pad_left + pad_right - kernel) / stride + 1;
}

namespace detail {

// Zero-padded copy of every (n, c) row; empty result means "no padding, read x directly".
inline std::vector<double> pad_rows(const Tensor3& x, int pad_left, int pad_right) {
  if (pad_left == 0 && pad_right == 0) return {};
  const int lp = x.l + pad_left + pad_right;
  std::vector<double> padded(static_cast<std::size_t>(x.n) * x.c * lp, 0.0);
  parallel_for(static_cast<std::size_t>(x.n) * x.c, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t rc = lo; rc < hi; ++rc) {
      const double* src = x.v.data() + rc * x.l;
      double* dst = padded.data() + rc * lp + pad_left;
      std::copy(src, src + x.l, dst);
    }
  });
  return padded;
}

// Stride-1 kernels specialized on the tap count so the accumulator tiles stay
// in registers. Accumulation order per output element is identical to the
// generic path: bias first, then channel-major, tap-minor fma.
template <int K>
void conv_fwd_row_s1(const double* xrow0, std::size_t xrow_len, int cin, const double* wj, double bj, double* yr,
                     int out_len) {
  constexpr int M = 32;
  double acc[M];
  for (int ib = 0; ib < out_len; ib += M) {
    const int m = std::min(M, out_len - ib);
    for (int q = 0; q < m; ++q) acc[q] = bj;
    for (int c = 0; c < cin; ++c) {
      const double* __restrict__ xr = xrow0 + static_cast<std::size_t>(c) * xrow_len + ib;
      const double* __restrict__ wc = wj + static_cast<std::size_t>(c) * K;
      if (m == M) {
        for (int t = 0; t < K; ++t) {
          const double wv = wc[t];
          const double* xt = xr + t;
          for (int q = 0; q < M; ++q) acc[q] = std::fma(wv, xt[q], acc[q]);
        }
      } else {
        for (int t = 0; t < K; ++t) {
          const double wv = wc[t];
          const double* xt = xr + t;
          for (int q = 0; q < m; ++q) acc[q] = std::fma(wv, xt[q], acc[q]);
        }
      }
    }
    for (int q = 0; q < m; ++q) yr[ib + q] = acc[q];
  }
}

// Four output channels at once: the x loads are shared across the channel
// tile, which roughly halves the load pressure per fma.
template <int K>
void conv_fwd_row4_s1(const double* xrow0, std::size_t xrow_len, int cin, const double* w, const double* bias,
                      int j0, double* y0, std::size_t yrow_len, int out_len) {
  constexpr int M = 24;
  double acc0[M], acc1[M], acc2[M], acc3[M];
  const std::size_t wstride = static_cast<std::size_t>(cin) * K;
  const double* w0 = w + static_cast<std::size_t>(j0) * wstride;
  const double* w1 = w0 + wstride;
  const double* w2 = w1 + wstride;
  const double* w3 = w2 + wstride;
  for (int ib = 0; ib < out_len; ib += M) {
    const int m = std::min(M, out_len - ib);
    for (int q = 0; q < m; ++q) {
      acc0[q] = bias[j0];
      acc1[q] = bias[j0 + 1];
      acc2[q] = bias[j0 + 2];
      acc3[q] = bias[j0 + 3];
    }
    for (int c = 0; c < cin; ++c) {
      const double* __restrict__ xr = xrow0 + static_cast<std::size_t>(c) * xrow_len + ib;
      const std::size_t co = static_cast<std::size_t>(c) * K;
      if (m == M) {
        for (int t = 0; t < K; ++t) {
          const double w0v = w0[co + t], w1v = w1[co + t], w2v = w2[co + t], w3v = w3[co + t];
          const double* xt = xr + t;
          for (int q = 0; q < M; ++q) {
            const double xv = xt[q];
            acc0[q] = std::fma(w0v, xv, acc0[q]);
            acc1[q] = std::fma(w1v, xv, acc1[q]);
            acc2[q] = std::fma(w2v, xv, acc2[q]);
            acc3[q] = std::fma(w3v, xv, acc3[q]);
          }
        }
      } else {
        for (int t = 0; t < K; ++t) {
          const double w0v = w0[co + t], w1v = w1[co + t], w2v = w2[co + t], w3v = w3[co + t];
          const double* xt = xr + t;
          for (int q = 0; q < m; ++q) {
            const double xv = xt[q];
            acc0[q] = std::fma(w0v, xv, acc0[q]);
            acc1[q] = std::fma(w1v, xv, acc1[q]);
            acc2[q] = std::fma(w2v, xv, acc2[q]);
            acc3[q] = std::fma(w3v, xv, acc3[q]);
          }
        }
      }
    }
    for (int q = 0; q < m; ++q) {
      y0[ib + q] = acc0[q];
      y0[yrow_len + ib + q] = acc1[q];
      y0[2 * yrow_len + ib + q] = acc2[q];
      y0[3 * yrow_len + ib + q] = acc3[q];
    }
  }
}

// dx_pad[c, q] = sum_j sum_t w[j,c,t] * gy[j, q - t] via a gradient buffer
// padded with K-1 zeros on both sides, so every tap reads contiguously.
template <int K>
void conv_bwd_dx_row_s1(const double* gyp_n, std::size_t gyp_row_len, int kout, const double* w, int cin, int c,
                        double* dxr, int lp) {
  constexpr int M = 32;
  double acc[M];
  for (int qb = 0; qb < lp; qb += M) {
    const int m = std::min(M, lp - qb);
    for (int q = 0; q < m; ++q) acc[q] = 0.0;
    for (int j = 0; j < kout; ++j) {
      const double* __restrict__ wjc = w + (static_cast<std::size_t>(j) * cin + c) * K;
      const double* __restrict__ gr = gyp_n + static_cast<std::size_t>(j) * gyp_row_len + qb;
      if (m == M) {
        for (int t = 0; t < K; ++t) {
          const double wv = wjc[t];
          const double* gt = gr + (K - 1 - t);
          for (int q = 0; q < M; ++q) acc[q] = std::fma(wv, gt[q], acc[q]);
        }
      } else {
        for (int t = 0; t < K; ++t) {
          const double wv = wjc[t];
          const double* gt = gr + (K - 1 - t);
          for (int q = 0; q < m; ++q) acc[q] = std::fma(wv, gt[q], acc[q]);
        }
      }
    }
    for (int q = 0; q < m; ++q) dxr[qb + q] = acc[q];
  }
}

// Four dx rows at once; the gradient loads are shared across the channel tile.
template <int K>
void conv_bwd_dx_row4_s1(const double* gyp_n, std::size_t gyp_row_len, int kout, const double* w, int cin, int c0,
                         double* dx0, std::size_t dxrow_len, int lp) {
  constexpr int M = 24;
  double acc0[M], acc1[M], acc2[M], acc3[M];
  for (int qb = 0; qb < lp; qb += M) {
    const int m = std::min(M, lp - qb);
    for (int q = 0; q < m; ++q) acc0[q] = acc1[q] = acc2[q] = acc3[q] = 0.0;
    for (int j = 0; j < kout; ++j) {
      const double* __restrict__ wj = w + (static_cast<std::size_t>(j) * cin + c0) * K;
      const double* __restrict__ gr = gyp_n + static_cast<std::size_t>(j) * gyp_row_len + qb;
      if (m == M) {
        for (int t = 0; t < K; ++t) {
          const double w0v = wj[t], w1v = wj[K + t], w2v = wj[2 * K + t], w3v = wj[3 * K + t];
          const double* gt = gr + (K - 1 - t);
          for (int q = 0; q < M; ++q) {
            const double gv = gt[q];
            acc0[q] = std::fma(w0v, gv, acc0[q]);
            acc1[q] = std::fma(w1v, gv, acc1[q]);
            acc2[q] = std::fma(w2v, gv, acc2[q]);
            acc3[q] = std::fma(w3v, gv, acc3[q]);
          }
        }
      } else {
        for (int t = 0; t < K; ++t) {
          const double w0v = wj[t], w1v = wj[K + t], w2v = wj[2 * K + t], w3v = wj[3 * K + t];
          const double* gt = gr + (K - 1 - t);
          for (int q = 0; q < m; ++q) {
            const double gv = gt[q];
            acc0[q] = std::fma(w0v, gv, acc0[q]);
            acc1[q] = std::fma(w1v, gv, acc1[q]);
            acc2[q] = std::fma(w2v, gv, acc2[q]);
            acc3[q] = std::fma(w3v, gv, acc3[q]);
          }
        }
      }
    }
    for (int q = 0; q < m; ++q) {
      dx0[qb + q] = acc0[q];
      dx0[dxrow_len + qb + q] = acc1[q];
      dx0[2 * dxrow_len + qb + q] = acc2[q];
      dx0[3 * dxrow_len + qb + q] = acc3[q];
    }
  }
}

// Splits every padded row into even/odd phases so stride-2 kernels read
// contiguously: phase r holds positions r, r+2, r+4, ...
struct PhaseRows {
  std::vector<double> ph0, ph1;
  int len0 = 0, len1 = 0;
};

inline PhaseRows split_phases(const double* xbase, std::size_t rows, int row_len) {
  PhaseRows p;
  p.len0 = (row_len + 1) / 2;
  p.len1 = row_len / 2;
  p.ph0.resize(rows * static_cast<std::size_t>(p.len0));
  p.ph1.resize(rows * static_cast<std::size_t>(p.len1));
  parallel_for(rows, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t rc = lo; rc < hi; ++rc) {
      const double* src = xbase + rc * static_cast<std::size_t>(row_len);
      double* d0 = p.ph0.data() + rc * static_cast<std::size_t>(p.len0);
      double* d1 = p.ph1.data() + rc * static_cast<std::size_t>(p.len1);
      for (int m = 0; m < p.len1; ++m) {
        d0[m] = src[2 * m];
        d1[m] = src[2 * m + 1];
      }
      if (p.len0 > p.len1) d0[p.len0 - 1] = src[2 * (p.len0 - 1)];
    }
  });
  return p;
}

// Stride-2 forward over phase-split rows. Tap order is untouched: tap t reads
// phase t&1 at offset t>>1, so the per-element accumulation order still
// matches the naive reference exactly.
template <int K>
void conv_fwd_row4_s2(const double* ph0, const double* ph1, std::size_t len0, std::size_t len1, int cin,
                      const double* w, const double* bias, int j0, double* y0, std::size_t yrow_len, int out_len) {
  constexpr int M = 24;
  double acc0[M], acc1[M], acc2[M], acc3[M];
  const std::size_t wstride = static_cast<std::size_t>(cin) * K;
  const double* w0 = w + static_cast<std::size_t>(j0) * wstride;
  const double* w1 = w0 + wstride;
  const double* w2 = w1 + wstride;
  const double* w3 = w2 + wstride;
  for (int ib = 0; ib < out_len; ib += M) {
    const int m = std::min(M, out_len - ib);
    for (int q = 0; q < m; ++q) {
      acc0[q] = bias[j0];
      acc1[q] = bias[j0 + 1];
      acc2[q] = bias[j0 + 2];
      acc3[q] = bias[j0 + 3];
    }
    for (int c = 0; c < cin; ++c) {
      const double* __restrict__ x0 = ph0 + static_cast<std::size_t>(c) * len0 + ib;
      const double* __restrict__ x1 = ph1 + static_cast<std::size_t>(c) * len1 + ib;
      const std::size_t co = static_cast<std::size_t>(c) * K;
      // taps processed in even/odd pairs; per-lane fma order stays 0,1,2,...
      if (m == M) {
        for (int u = 0; u < K / 2; ++u) {
          const double w0e = w0[co + 2 * u], w1e = w1[co + 2 * u], w2e = w2[co + 2 * u], w3e = w3[co + 2 * u];
          const double w0o = w0[co + 2 * u + 1], w1o = w1[co + 2 * u + 1], w2o = w2[co + 2 * u + 1],
                       w3o = w3[co + 2 * u + 1];
          const double* xe = x0 + u;
          const double* xo = x1 + u;
          for (int q = 0; q < M; ++q) {
            const double xev = xe[q], xov = xo[q];
            acc0[q] = std::fma(w0o, xov, std::fma(w0e, xev, acc0[q]));
            acc1[q] = std::fma(w1o, xov, std::fma(w1e, xev, acc1[q]));
            acc2[q] = std::fma(w2o, xov, std::fma(w2e, xev, acc2[q]));
            acc3[q] = std::fma(w3o, xov, std::fma(w3e, xev, acc3[q]));
          }
        }
      } else {
        for (int u = 0; u < K / 2; ++u) {
          const double w0e = w0[co + 2 * u], w1e = w1[co + 2 * u], w2e = w2[co + 2 * u], w3e = w3[co + 2 * u];
          const double w0o = w0[co + 2 * u + 1], w1o = w1[co + 2 * u + 1], w2o = w2[co + 2 * u + 1],
                       w3o = w3[co + 2 * u + 1];
          const double* xe = x0 + u;
          const double* xo = x1 + u;
          for (int q = 0; q < m; ++q) {
            const double xev = xe[q], xov = xo[q];
            acc0[q] = std::fma(w0o, xov, std::fma(w0e, xev, acc0[q]));
            acc1[q] = std::fma(w1o, xov, std::fma(w1e, xev, acc1[q]));
            acc2[q] = std::fma(w2o, xov, std::fma(w2e, xev, acc2[q]));
            acc3[q] = std::fma(w3o, xov, std::fma(w3e, xev, acc3[q]));
          }
        }
      }
      if constexpr (K % 2 == 1) {
        const double w0e = w0[co + K - 1], w1e = w1[co + K - 1], w2e = w2[co + K - 1], w3e = w3[co + K - 1];
        const double* xe = x0 + (K - 1) / 2;
        for (int q = 0; q < m; ++q) {
          const double xev = xe[q];
          acc0[q] = std::fma(w0e, xev, acc0[q]);
          acc1[q] = std::fma(w1e, xev, acc1[q]);
          acc2[q] = std::fma(w2e, xev, acc2[q]);
          acc3[q] = std::fma(w3e, xev, acc3[q]);
        }
      }
    }
    for (int q = 0; q < m; ++q) {
      y0[ib + q] = acc0[q];
      y0[yrow_len + ib + q] = acc1[q];
      y0[2 * yrow_len + ib + q] = acc2[q];
      y0[3 * yrow_len + ib + q] = acc3[q];
    }
  }
}

template <int K>
void conv_fwd_row_s2(const double* ph0, const double* ph1, std::size_t len0, std::size_t len1, int cin,
                     const double* wj, double bj, double* yr, int out_len) {
  constexpr int M = 32;
  double acc[M];
  for (int ib = 0; ib < out_len; ib += M) {
    const int m = std::min(M, out_len - ib);
    for (int q = 0; q < m; ++q) acc[q] = bj;
    for (int c = 0; c < cin; ++c) {
      const double* __restrict__ x0 = ph0 + static_cast<std::size_t>(c) * len0 + ib;
      const double* __restrict__ x1 = ph1 + static_cast<std::size_t>(c) * len1 + ib;
      const double* __restrict__ wc = wj + static_cast<std::size_t>(c) * K;
      if (m == M) {
        for (int u = 0; u < K / 2; ++u) {
          const double we = wc[2 * u], wo = wc[2 * u + 1];
          const double* xe = x0 + u;
          const double* xo = x1 + u;
          for (int q = 0; q < M; ++q) acc[q] = std::fma(wo, xo[q], std::fma(we, xe[q], acc[q]));
        }
      } else {
        for (int u = 0; u < K / 2; ++u) {
          const double we = wc[2 * u], wo = wc[2 * u + 1];
          const double* xe = x0 + u;
          const double* xo = x1 + u;
          for (int q = 0; q < m; ++q) acc[q] = std::fma(wo, xo[q], std::fma(we, xe[q], acc[q]));
        }
      }
      if constexpr (K % 2 == 1) {
        const double we = wc[K - 1];
        const double* xe = x0 + (K - 1) / 2;
        for (int q = 0; q < m; ++q) acc[q] = std::fma(we, xe[q], acc[q]);
      }
    }
    for (int q = 0; q < m; ++q) yr[ib + q] = acc[q];
  }
}

// gw[j,c,:] accumulated in a K-wide register tile over (batch, position).
template <int K>
void conv_bwd_dw_jc_s1(const Tensor3& grad_out, const double* xbase, std::size_t xrow_len, int cin, int j, int c,
                       int out_len, double* gw) {
  double acc[K];
  for (int t = 0; t < K; ++t) acc[t] = 0.0;
  for (int ni = 0; ni < grad_out.n; ++ni) {
    const double* __restrict__ gy = grad_out.row(ni, j);
    const double* __restrict__ xr = xbase + (static_cast<std::size_t>(ni) * cin + c) * xrow_len;
    for (int i = 0; i < out_len; ++i) {
      const double gv = gy[i];
      const double* xt = xr + i;
      for (int t = 0; t < K; ++t) acc[t] = std::fma(gv, xt[t], acc[t]);
    }
  }
  for (int t = 0; t < K; ++t) gw[t] = acc[t];
}

// Four output channels of gw at once for one input channel; the x loads are
// shared across the tile.
template <int K>
void conv_bwd_dw_j4c_s1(const Tensor3& grad_out, const double* xbase, std::size_t xrow_len, int cin, int j0, int c,
                        int out_len, double* gw0, std::size_t gwrow_len) {
  double acc0[K], acc1[K], acc2[K], acc3[K];
  for (int t = 0; t < K; ++t) acc0[t] = acc1[t] = acc2[t] = acc3[t] = 0.0;
  for (int ni = 0; ni < grad_out.n; ++ni) {
    const double* __restrict__ gy0 = grad_out.row(ni, j0);
    const double* __restrict__ gy1 = grad_out.row(ni, j0 + 1);
    const double* __restrict__ gy2 = grad_out.row(ni, j0 + 2);
    const double* __restrict__ gy3 = grad_out.row(ni, j0 + 3);
    const double* __restrict__ xr = xbase + (static_cast<std::size_t>(ni) * cin + c) * xrow_len;
    for (int i = 0; i < out_len; ++i) {
      const double g0 = gy0[i], g1 = gy1[i], g2 = gy2[i], g3 = gy3[i];
      const double* xt = xr + i;
      for (int t = 0; t < K; ++t) {
        const double xv = xt[t];
        acc0[t] = std::fma(g0, xv, acc0[t]);
        acc1[t] = std::fma(g1, xv, acc1[t]);
        acc2[t] = std::fma(g2, xv, acc2[t]);
        acc3[t] = std::fma(g3, xv, acc3[t]);
      }
    }
  }
  for (int t = 0; t < K; ++t) {
    gw0[t] = acc0[t];
    gw0[gwrow_len + t] = acc1[t];
    gw0[2 * gwrow_len + t] = acc2[t];
    gw0[3 * gwrow_len + t] = acc3[t];
  }
}

// Stride-2 weight gradients for one phase: taps r, r+2, ... of four output
// channels, accumulated over phase-split x rows.
template <int KR>
void conv_bwd_dw_j4c_s2(const Tensor3& grad_out, const double* phbase, std::size_t phrow_len, int cin, int j0, int c,
                        int out_len, int phase, double* gw0, std::size_t gwrow_len) {
  double acc0[KR], acc1[KR], acc2[KR], acc3[KR];
  for (int u = 0; u < KR; ++u) acc0[u] = acc1[u] = acc2[u] = acc3[u] = 0.0;
  for (int ni = 0; ni < grad_out.n; ++ni) {
    const double* __restrict__ gy0 = grad_out.row(ni, j0);
    const double* __restrict__ gy1 = grad_out.row(ni, j0 + 1);
    const double* __restrict__ gy2 = grad_out.row(ni, j0 + 2);
    const double* __restrict__ gy3 = grad_out.row(ni, j0 + 3);
    const double* __restrict__ xr = phbase + (static_cast<std::size_t>(ni) * cin + c) * phrow_len;
    for (int i = 0; i < out_len; ++i) {
      const double g0 = gy0[i], g1 = gy1[i], g2 = gy2[i], g3 = gy3[i];
      const double* xt = xr + i;
      for (int u = 0; u < KR; ++u) {
        const double xv = xt[u];
        acc0[u] = std::fma(g0, xv, acc0[u]);
        acc1[u] = std::fma(g1, xv, acc1[u]);
        acc2[u] = std::fma(g2, xv, acc2[u]);
        acc3[u] = std::fma(g3, xv, acc3[u]);
      }
    }
  }
  for (int u = 0; u < KR; ++u) {
    gw0[2 * u + phase] = acc0[u];
    gw0[gwrow_len + 2 * u + phase] = acc1[u];
    gw0[2 * gwrow_len + 2 * u + phase] = acc2[u];
    gw0[3 * gwrow_len + 2 * u + phase] = acc3[u];
  }
}

template <int KR>
void conv_bwd_dw_jc_s2(const Tensor3& grad_out, const double* phbase, std::size_t phrow_len, int cin, int j, int c,
                       int out_len, int phase, double* gw) {
  double acc[KR];
  for (int u = 0; u < KR; ++u) acc[u] = 0.0;
  for (int ni = 0; ni < grad_out.n; ++ni) {
    const double* __restrict__ gy = grad_out.row(ni, j);
    const double* __restrict__ xr = phbase + (static_cast<std::size_t>(ni) * cin + c) * phrow_len;
    for (int i = 0; i < out_len; ++i) {
      const double gv = gy[i];
      const double* xt = xr + i;
      for (int u = 0; u < KR; ++u) acc[u] = std::fma(gv, xt[u], acc[u]);
    }
  }
  for (int u = 0; u < KR; ++u) gw[2 * u + phase] = acc[u];
}

}  // namespace detail

// y[n,j,i] = b[j] + sum_c sum_t w[j,c,t] * xpad[n,c,i*s+t]
// Accumulation per output element is exactly bias-first, channel-major,
// tap-minor fma, which the naive reference in the tests reproduces.
inline Tensor3 conv1d_forward(const Tensor3& x, const Conv1dParams& p) {
  if (x.c != p.in_channels()) fail(ErrorKind::ShapeMismatch, "conv1d: channel mismatch");
  if (p.kernel() < 1 || p.stride < 1 || p.pad_left < 0 || p.pad_right < 0)
    fail(ErrorKind::ShapeMismatch, "conv1d: bad kernel/stride/padding");
  const int out_len = conv1d_out_len(x.l, p.kernel(), p.stride, p.pad_left, p.pad_right);
  if (out_len < 1) fail(ErrorKind::EmptyOutput, "conv1d: output would be empty");

  const int kk = p.kernel(), s = p.stride, cin = x.c, kout = p.out_channels();
  const int lp = x.l + p.pad_left + p.pad_right;
  const std::vector<double> padded = detail::pad_rows(x, p.pad_left, p.pad_right);
  const double* xbase = padded.empty() ? x.v.data() : padded.data();
  const int xrow_len = padded.empty() ? x.l : lp;

  Tensor3 y(x.n, kout, out_len);
  // tiles of four output channels; remainders and non-tiled cases run the
  // single-channel path
  const bool known_kernel = kk == 32 || kk == 16 || kk == 1;
  const bool tiled_s1 = s == 1 && known_kernel;
  const bool tiled_s2 = s == 2 && known_kernel;
  detail::PhaseRows phases;
  if (tiled_s2) phases = detail::split_phases(xbase, static_cast<std::size_t>(x.n) * cin, xrow_len);
  const int jblocks = (tiled_s1 || tiled_s2) ? kout / 4 : 0;
  const int jrem_start = jblocks * 4;
  const int jobs_per_n = jblocks + (kout - jrem_start);
  parallel_for(static_cast<std::size_t>(x.n) * jobs_per_n, [&](std::size_t lo, std::size_t hi) {
    constexpr int kTile = 64;
    double acc[kTile];
    for (std::size_t item = lo; item < hi; ++item) {
      const int ni = static_cast<int>(item) / jobs_per_n;
      const int slot = static_cast<int>(item) % jobs_per_n;
      const double* xrow0 = xbase + static_cast<std::size_t>(ni) * cin * xrow_len;
      const double* ph0 = tiled_s2 ? phases.ph0.data() + static_cast<std::size_t>(ni) * cin * phases.len0 : nullptr;
      const double* ph1 = tiled_s2 ? phases.ph1.data() + static_cast<std::size_t>(ni) * cin * phases.len1 : nullptr;
      if (slot < jblocks) {
        const int j0 = slot * 4;
        double* y0 = y.row(ni, j0);
        if (tiled_s1) {
          if (kk == 32)
            detail::conv_fwd_row4_s1<32>(xrow0, static_cast<std::size_t>(xrow_len), cin, p.weight.v.data(),
                                         p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
          else if (kk == 16)
            detail::conv_fwd_row4_s1<16>(xrow0, static_cast<std::size_t>(xrow_len), cin, p.weight.v.data(),
                                         p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
          else
            detail::conv_fwd_row4_s1<1>(xrow0, static_cast<std::size_t>(xrow_len), cin, p.weight.v.data(),
                                        p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
        } else {
          if (kk == 32)
            detail::conv_fwd_row4_s2<32>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                         static_cast<std::size_t>(phases.len1), cin, p.weight.v.data(),
                                         p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
          else if (kk == 16)
            detail::conv_fwd_row4_s2<16>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                         static_cast<std::size_t>(phases.len1), cin, p.weight.v.data(),
                                         p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
          else
            detail::conv_fwd_row4_s2<1>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                        static_cast<std::size_t>(phases.len1), cin, p.weight.v.data(),
                                        p.bias.data(), j0, y0, static_cast<std::size_t>(out_len), out_len);
        }
        continue;
      }
      const int j = jrem_start + (slot - jblocks);
      double* yrow = y.row(ni, j);
      const double bj = p.bias[j];
      const double* wj = p.weight.row(j, 0);
      if (tiled_s1) {
        if (kk == 32)
          detail::conv_fwd_row_s1<32>(xrow0, static_cast<std::size_t>(xrow_len), cin, wj, bj, yrow, out_len);
        else if (kk == 16)
          detail::conv_fwd_row_s1<16>(xrow0, static_cast<std::size_t>(xrow_len), cin, wj, bj, yrow, out_len);
        else
          detail::conv_fwd_row_s1<1>(xrow0, static_cast<std::size_t>(xrow_len), cin, wj, bj, yrow, out_len);
        continue;
      }
      if (tiled_s2) {
        if (kk == 32)
          detail::conv_fwd_row_s2<32>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                      static_cast<std::size_t>(phases.len1), cin, wj, bj, yrow, out_len);
        else if (kk == 16)
          detail::conv_fwd_row_s2<16>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                      static_cast<std::size_t>(phases.len1), cin, wj, bj, yrow, out_len);
        else
          detail::conv_fwd_row_s2<1>(ph0, ph1, static_cast<std::size_t>(phases.len0),
                                     static_cast<std::size_t>(phases.len1), cin, wj, bj, yrow, out_len);
        continue;
      }
      for (int ib = 0; ib < out_len; ib += kTile) {
        const int m = std::min(kTile, out_len - ib);
        for (int q = 0; q < m; ++q) acc[q] = bj;
        for (int c = 0; c < cin; ++c) {
          const double* __restrict__ xr = xrow0 + static_cast<std::size_t>(c) * xrow_len + static_cast<std::size_t>(ib) * s;
          const double* __restrict__ wc = wj + static_cast<std::size_t>(c) * kk;
          if (s == 1) {
            for (int t = 0; t < kk; ++t) {
              const double wv = wc[t];
              const double* xt = xr + t;
              for (int q = 0; q < m; ++q) acc[q] = std::fma(wv, xt[q], acc[q]);
            }
          } else {
            for (int t = 0; t < kk; ++t) {
              const double wv = wc[t];
              for (int q = 0; q < m; ++q) acc[q] = std::fma(wv, xr[static_cast<std::size_t>(q) * s + t], acc[q]);
            }
          }
        }
        for (int q = 0; q < m; ++q) yrow[ib + q] = acc[q];
      }
    }
  });
  return y;
}

struct Conv1dGrads {
  Tensor3 x;       // same shape as forward input
  Tensor3 weight;  // same shape as p.weight
  std::vector<double> bias;
};

inline Conv1dGrads conv1d_backward(const Tensor3& x, const Conv1dParams& p, const Tensor3& grad_out,
                                   bool need_grad_x = true) {
  const int out_len = conv1d_out_len(x.l, p.kernel(), p.stride, p.pad_left, p.pad_right);
  if (grad_out.n != x.n || grad_out.c != p.out_channels() || grad_out.l != out_len)
    fail(ErrorKind::ShapeMismatch, "conv1d backward: grad_out shape mismatch");

  const int kk = p.kernel(), s = p.stride, cin = x.c, kout = p.out_channels();
  const int lp = x.l + p.pad_left + p.pad_right;
  const std::vector<double> padded = detail::pad_rows(x, p.pad_left, p.pad_right);
  const double* xbase = padded.empty() ? x.v.data() : padded.data();
  const int xrow_len = padded.empty() ? x.l : lp;

  Conv1dGrads g;
  g.weight = Tensor3(kout, cin, kk);
  g.bias.assign(static_cast<std::size_t>(kout), 0.0);

  // bias gradients: cheap sequential reduction per output channel
  for (int j = 0; j < kout; ++j) {
    double accb = 0.0;
    for (int ni = 0; ni < x.n; ++ni) {
      const double* gy = grad_out.row(ni, j);
      for (int i = 0; i < out_len; ++i) accb += gy[i];
    }
    g.bias[static_cast<std::size_t>(j)] = accb;
  }

  // weight gradients: tiles of four output channels per input channel
  const bool known_kernel = kk == 32 || kk == 16 || kk == 1;
  detail::PhaseRows xphases;
  if (s == 2 && known_kernel)
    xphases = detail::split_phases(xbase, static_cast<std::size_t>(x.n) * cin, xrow_len);
  {
    const bool tiled = (s == 1 || s == 2) && known_kernel;
    const int jblocks = tiled ? kout / 4 : 0;
    const int jrem_start = jblocks * 4;
    const int jobs_per_c = jblocks + (kout - jrem_start);
    const std::size_t gwrow = static_cast<std::size_t>(cin) * kk;
    parallel_for(static_cast<std::size_t>(jobs_per_c) * cin, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t item = lo; item < hi; ++item) {
        const int slot = static_cast<int>(item) / cin;
        const int c = static_cast<int>(item) % cin;
        if (slot < jblocks) {
          const int j0 = slot * 4;
          double* gw0 = g.weight.row(j0, c);
          if (s == 1) {
            if (kk == 32)
              detail::conv_bwd_dw_j4c_s1<32>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j0, c,
                                             out_len, gw0, gwrow);
            else if (kk == 16)
              detail::conv_bwd_dw_j4c_s1<16>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j0, c,
                                             out_len, gw0, gwrow);
            else
              detail::conv_bwd_dw_j4c_s1<1>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j0, c, out_len,
                                            gw0, gwrow);
          } else {
            if (kk == 32) {
              detail::conv_bwd_dw_j4c_s2<16>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0),
                                             cin, j0, c, out_len, 0, gw0, gwrow);
              detail::conv_bwd_dw_j4c_s2<16>(grad_out, xphases.ph1.data(), static_cast<std::size_t>(xphases.len1),
                                             cin, j0, c, out_len, 1, gw0, gwrow);
            } else if (kk == 16) {
              detail::conv_bwd_dw_j4c_s2<8>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0),
                                            cin, j0, c, out_len, 0, gw0, gwrow);
              detail::conv_bwd_dw_j4c_s2<8>(grad_out, xphases.ph1.data(), static_cast<std::size_t>(xphases.len1),
                                            cin, j0, c, out_len, 1, gw0, gwrow);
            } else {
              detail::conv_bwd_dw_j4c_s2<1>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0),
                                            cin, j0, c, out_len, 0, gw0, gwrow);
            }
          }
          continue;
        }
        const int j = tiled ? jrem_start + (slot - jblocks) : slot;
        double* __restrict__ gw = g.weight.row(j, c);
        if (s == 1 && known_kernel) {
          if (kk == 32)
            detail::conv_bwd_dw_jc_s1<32>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j, c, out_len,
                                          gw);
          else if (kk == 16)
            detail::conv_bwd_dw_jc_s1<16>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j, c, out_len,
                                          gw);
          else
            detail::conv_bwd_dw_jc_s1<1>(grad_out, xbase, static_cast<std::size_t>(xrow_len), cin, j, c, out_len, gw);
          continue;
        }
        if (s == 2 && known_kernel) {
          if (kk == 32) {
            detail::conv_bwd_dw_jc_s2<16>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0), cin,
                                          j, c, out_len, 0, gw);
            detail::conv_bwd_dw_jc_s2<16>(grad_out, xphases.ph1.data(), static_cast<std::size_t>(xphases.len1), cin,
                                          j, c, out_len, 1, gw);
          } else if (kk == 16) {
            detail::conv_bwd_dw_jc_s2<8>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0), cin,
                                         j, c, out_len, 0, gw);
            detail::conv_bwd_dw_jc_s2<8>(grad_out, xphases.ph1.data(), static_cast<std::size_t>(xphases.len1), cin,
                                         j, c, out_len, 1, gw);
          } else {
            detail::conv_bwd_dw_jc_s2<1>(grad_out, xphases.ph0.data(), static_cast<std::size_t>(xphases.len0), cin,
                                         j, c, out_len, 0, gw);
          }
          continue;
        }
        for (int ni = 0; ni < x.n; ++ni) {
          const double* __restrict__ gy = grad_out.row(ni, j);
          const double* __restrict__ xr = xbase + (static_cast<std::size_t>(ni) * cin + c) * xrow_len;
          for (int i = 0; i < out_len; ++i) {
            const double gv = gy[i];
            const double* xt = xr + static_cast<std::size_t>(i) * s;
            for (int t = 0; t < kk; ++t) gw[t] = std::fma(gv, xt[t], gw[t]);
          }
        }
      }
    });
  }

  if (need_grad_x) {
    g.x = Tensor3(x.n, x.c, x.l);
    std::vector<double> dxpad;
    const bool has_pad = !padded.empty();
    if (has_pad) dxpad.assign(static_cast<std::size_t>(x.n) * cin * lp, 0.0);
    double* dxbase = has_pad ? dxpad.data() : g.x.v.data();

    if (s == 1) {
      // gather form over a zero-extended gradient buffer
      const int gyp_len = out_len + 2 * (kk - 1);
      std::vector<double> gyp(static_cast<std::size_t>(x.n) * kout * gyp_len, 0.0);
      parallel_for(static_cast<std::size_t>(x.n) * kout, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t nj = lo; nj < hi; ++nj) {
          const double* src = grad_out.v.data() + nj * static_cast<std::size_t>(out_len);
          double* dst = gyp.data() + nj * static_cast<std::size_t>(gyp_len) + (kk - 1);
          std::copy(src, src + out_len, dst);
        }
      });
      const bool tiled = kk == 32 || kk == 16 || kk == 1;
      const int cblocks = tiled ? cin / 4 : 0;
      const int crem_start = cblocks * 4;
      const int jobs_per_n = cblocks + (cin - crem_start);
      parallel_for(static_cast<std::size_t>(x.n) * jobs_per_n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t item = lo; item < hi; ++item) {
          const int ni = static_cast<int>(item) / jobs_per_n;
          const int slot = static_cast<int>(item) % jobs_per_n;
          const double* gyp_n = gyp.data() + static_cast<std::size_t>(ni) * kout * gyp_len;
          if (slot < cblocks) {
            const int c0 = slot * 4;
            double* dx0 = dxbase + (static_cast<std::size_t>(ni) * cin + c0) * xrow_len;
            if (kk == 32)
              detail::conv_bwd_dx_row4_s1<32>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin,
                                              c0, dx0, static_cast<std::size_t>(xrow_len), lp);
            else if (kk == 16)
              detail::conv_bwd_dx_row4_s1<16>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin,
                                              c0, dx0, static_cast<std::size_t>(xrow_len), lp);
            else
              detail::conv_bwd_dx_row4_s1<1>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin,
                                             c0, dx0, static_cast<std::size_t>(xrow_len), lp);
            if (has_pad) {
              for (int cc = c0; cc < c0 + 4; ++cc) {
                const double* src = dxbase + (static_cast<std::size_t>(ni) * cin + cc) * xrow_len + p.pad_left;
                std::copy(src, src + x.l, g.x.row(ni, cc));
              }
            }
            continue;
          }
          const int c = tiled ? crem_start + (slot - cblocks) : slot;
          double* __restrict__ dxr = dxbase + (static_cast<std::size_t>(ni) * cin + c) * xrow_len;
          if (kk == 32)
            detail::conv_bwd_dx_row_s1<32>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin, c,
                                           dxr, lp);
          else if (kk == 16)
            detail::conv_bwd_dx_row_s1<16>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin, c,
                                           dxr, lp);
          else if (kk == 1)
            detail::conv_bwd_dx_row_s1<1>(gyp_n, static_cast<std::size_t>(gyp_len), kout, p.weight.v.data(), cin, c,
                                          dxr, lp);
          else {
            for (int j = 0; j < kout; ++j) {
              const double* __restrict__ gy = grad_out.row(ni, j);
              const double* wc = p.weight.row(j, c);
              for (int t = 0; t < kk; ++t) {
                const double wv = wc[t];
                double* dxt = dxr + t;
                for (int i = 0; i < out_len; ++i) dxt[i] = std::fma(wv, gy[i], dxt[i]);
              }
            }
          }
          if (has_pad) {
            double* out = g.x.row(ni, c);
            std::copy(dxr + p.pad_left, dxr + p.pad_left + x.l, out);
          }
        }
      });
    } else if (s == 2 && known_kernel) {
      // phase decomposition: dx positions of parity r only see taps of the
      // same parity, each phase reduces to a stride-1 gather
      const int k0 = (kk + 1) / 2;
      const int k1 = kk / 2;
      const int len0 = (lp + 1) / 2;
      const int len1 = lp / 2;
      std::vector<double> w0(static_cast<std::size_t>(kout) * cin * k0);
      std::vector<double> w1(k1 > 0 ? static_cast<std::size_t>(kout) * cin * k1 : 0);
      for (int j = 0; j < kout; ++j)
        for (int c = 0; c < cin; ++c) {
          const double* wc = p.weight.row(j, c);
          double* d0 = w0.data() + (static_cast<std::size_t>(j) * cin + c) * k0;
          for (int u = 0; u < k0; ++u) d0[u] = wc[2 * u];
          if (k1 > 0) {
            double* d1 = w1.data() + (static_cast<std::size_t>(j) * cin + c) * k1;
            for (int u = 0; u < k1; ++u) d1[u] = wc[2 * u + 1];
          }
        }
      const int gyp_len = out_len + 2 * k0;  // left pad k0-1 plus right slack
      std::vector<double> gyp(static_cast<std::size_t>(x.n) * kout * gyp_len, 0.0);
      parallel_for(static_cast<std::size_t>(x.n) * kout, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t nj = lo; nj < hi; ++nj) {
          const double* src = grad_out.v.data() + nj * static_cast<std::size_t>(out_len);
          double* dst = gyp.data() + nj * static_cast<std::size_t>(gyp_len) + (k0 - 1);
          std::copy(src, src + out_len, dst);
        }
      });

      std::vector<double> dxph0(static_cast<std::size_t>(x.n) * cin * len0);
      std::vector<double> dxph1(k1 > 0 ? static_cast<std::size_t>(x.n) * cin * len1 : 0);
      const auto run_phase = [&](int kr, const std::vector<double>& wr, std::vector<double>& dxph, int len_r,
                                 int base_shift) {
        const int cblocks = cin / 4;
        const int crem_start = cblocks * 4;
        const int jobs_per_n = cblocks + (cin - crem_start);
        parallel_for(static_cast<std::size_t>(x.n) * jobs_per_n, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t item = lo; item < hi; ++item) {
            const int ni = static_cast<int>(item) / jobs_per_n;
            const int slot = static_cast<int>(item) % jobs_per_n;
            const double* gyp_n = gyp.data() + static_cast<std::size_t>(ni) * kout * gyp_len + base_shift;
            if (slot < cblocks) {
              const int c0 = slot * 4;
              double* dx0 = dxph.data() + (static_cast<std::size_t>(ni) * cin + c0) * len_r;
              if (kr == 16)
                detail::conv_bwd_dx_row4_s1<16>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c0,
                                                dx0, static_cast<std::size_t>(len_r), len_r);
              else if (kr == 8)
                detail::conv_bwd_dx_row4_s1<8>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c0,
                                               dx0, static_cast<std::size_t>(len_r), len_r);
              else
                detail::conv_bwd_dx_row4_s1<1>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c0,
                                               dx0, static_cast<std::size_t>(len_r), len_r);
              continue;
            }
            const int c = crem_start + (slot - cblocks);
            double* dxr = dxph.data() + (static_cast<std::size_t>(ni) * cin + c) * len_r;
            if (kr == 16)
              detail::conv_bwd_dx_row_s1<16>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c, dxr,
                                             len_r);
            else if (kr == 8)
              detail::conv_bwd_dx_row_s1<8>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c, dxr,
                                            len_r);
            else
              detail::conv_bwd_dx_row_s1<1>(gyp_n, static_cast<std::size_t>(gyp_len), kout, wr.data(), cin, c, dxr,
                                            len_r);
          }
        });
      };
      run_phase(k0, w0, dxph0, len0, k0 - k0);
      if (k1 > 0) run_phase(k1, w1, dxph1, len1, k0 - k1);

      parallel_for(static_cast<std::size_t>(x.n) * cin, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t nc = lo; nc < hi; ++nc) {
          double* __restrict__ dxr = dxbase + nc * xrow_len;
          const double* __restrict__ s0 = dxph0.data() + nc * static_cast<std::size_t>(len0);
          for (int m = 0; m < len0; ++m) dxr[2 * m] = s0[m];
          if (k1 > 0) {
            const double* __restrict__ s1 = dxph1.data() + nc * static_cast<std::size_t>(len1);
            for (int m = 0; m < len1; ++m) dxr[2 * m + 1] = s1[m];
          }
          if (has_pad) {
            const int ni = static_cast<int>(nc) / cin;
            const int c = static_cast<int>(nc) % cin;
            double* out = g.x.row(ni, c);
            std::copy(dxr + p.pad_left, dxr + p.pad_left + x.l, out);
          }
        }
      });
    } else {
      parallel_for(static_cast<std::size_t>(x.n) * cin, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t nc = lo; nc < hi; ++nc) {
          const int ni = static_cast<int>(nc) / cin;
          const int c = static_cast<int>(nc) % cin;
          double* __restrict__ dxr = dxbase + nc * xrow_len;
          for (int j = 0; j < kout; ++j) {
            const double* __restrict__ gy = grad_out.row(ni, j);
            const double* wc = p.weight.row(j, c);
            for (int t = 0; t < kk; ++t) {
              const double wv = wc[t];
              for (int i = 0; i < out_len; ++i) {
                const std::size_t q = static_cast<std::size_t>(i) * s + t;
                dxr[q] = std::fma(wv, gy[i], dxr[q]);
              }
            }
          }
          if (has_pad) {
            double* out = g.x.row(ni, c);
            std::copy(dxr + p.pad_left, dxr + p.pad_left + x.l, out);
          }
        }
      });
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormParams(int channels = 0)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0) {}

  int channels() const { return static_cast<int>(gamma.size()); }
};

struct BnCache {
  Tensor3 x_hat;
  std::vector<double> inv_std;  // per channel
  std::vector<double> gamma;    // snapshot for backward
  bool valid = false;
};

// Train: per-channel stats over (batch, length) with biased variance, then
// running stats update r <- (1-momentum)*r + momentum*batch_stat.
// Eval: uses running stats; no cache produced.
inline Tensor3 batchnorm_forward(const Tensor3& x, BatchNormParams& p, Mode mode, BnCache* cache = nullptr) {
  if (x.c != p.channels()) fail(ErrorKind::ShapeMismatch, "batchnorm: channel mismatch");
  const std::size_t m = static_cast<std::size_t>(x.n) * x.l;
  Tensor3 y(x.n, x.c, x.l);

  if (mode == Mode::Train) {
    if (m < 2) fail(ErrorKind::DegenerateBatch, "batchnorm train mode needs at least 2 values per channel");
    if (cache) {
      cache->x_hat = Tensor3(x.n, x.c, x.l);
      cache->inv_std.assign(x.c, 0.0);
      cache->gamma = p.gamma;
      cache->valid = true;
    }
    parallel_for(static_cast<std::size_t>(x.c), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t c = lo; c < hi; ++c) {
        double sum = 0.0;
        for (int ni = 0; ni < x.n; ++ni) {
          const double* xr = x.row(ni, static_cast<int>(c));
          for (int i = 0; i < x.l; ++i) sum += xr[i];
        }
        const double mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (int ni = 0; ni < x.n; ++ni) {
          const double* xr = x.row(ni, static_cast<int>(c));
          for (int i = 0; i < x.l; ++i) {
            const double d = xr[i] - mean;
            sq += d * d;
          }
        }
        const double var = sq / static_cast<double>(m);
        const double istd = 1.0 / std::sqrt(var + p.eps);
        const double gm = p.gamma[c], bt = p.beta[c];
        for (int ni = 0; ni < x.n; ++ni) {
          const double* xr = x.row(ni, static_cast<int>(c));
          double* yr = y.row(ni, static_cast<int>(c));
          double* hr = cache ? cache->x_hat.row(ni, static_cast<int>(c)) : nullptr;
          for (int i = 0; i < x.l; ++i) {
            const double h = (xr[i] - mean) * istd;
            if (hr) hr[i] = h;
            yr[i] = gm * h + bt;
          }
        }
        if (cache) cache->inv_std[c] = istd;
        p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * mean;
        p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * var;
      }
    });
  } else {
    parallel_for(static_cast<std::size_t>(x.c), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t c = lo; c < hi; ++c) {
        const double istd = 1.0 / std::sqrt(p.running_var[c] + p.eps);
        const double mean = p.running_mean[c];
        const double gm = p.gamma[c], bt = p.beta[c];
        for (int ni = 0; ni < x.n; ++ni) {
          const double* xr = x.row(ni, static_cast<int>(c));
          double* yr = y.row(ni, static_cast<int>(c));
          for (int i = 0; i < x.l; ++i) yr[i] = gm * (xr[i] - mean) * istd + bt;
        }
      }
    });
  }
  return y;
}

struct BnGrads {
  Tensor3 x;
  std::vector<double> gamma;
  std::vector<double> beta;
};

inline BnGrads batchnorm_backward(const BnCache& cache, const Tensor3& grad_out) {
  if (!cache.valid) fail(ErrorKind::StaleCache, "batchnorm backward without a train-mode cache");
  if (!cache.x_hat.same_shape(grad_out)) fail(ErrorKind::ShapeMismatch, "batchnorm backward: shape mismatch");
  const Tensor3& xh = cache.x_hat;
  const double m = static_cast<double>(static_cast<std::size_t>(xh.n) * xh.l);

  BnGrads g;
  g.x = Tensor3(xh.n, xh.c, xh.l);
  g.gamma.assign(xh.c, 0.0);
  g.beta.assign(xh.c, 0.0);

  parallel_for(static_cast<std::size_t>(xh.c), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      double s1 = 0.0, s2 = 0.0;
      for (int ni = 0; ni < xh.n; ++ni) {
        const double* gy = grad_out.row(ni, static_cast<int>(c));
        const double* hr = xh.row(ni, static_cast<int>(c));
        for (int i = 0; i < xh.l; ++i) {
          s1 += gy[i];
          s2 += gy[i] * hr[i];
        }
      }
      g.beta[c] = s1;
      g.gamma[c] = s2;
      const double k = cache.gamma[c] * cache.inv_std[c];
      const double mean_gy = s1 / m;
      const double mean_gyh = s2 / m;
      for (int ni = 0; ni < xh.n; ++ni) {
        const double* gy = grad_out.row(ni, static_cast<int>(c));
        const double* hr = xh.row(ni, static_cast<int>(c));
        double* gx = g.x.row(ni, static_cast<int>(c));
        for (int i = 0; i < xh.l; ++i) gx[i] = k * (gy[i] - mean_gy - hr[i] * mean_gyh);
      }
    }
  });
  return g;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

inline Tensor3 relu_forward(const Tensor3& x) {
  Tensor3 y(x.n, x.c, x.l);
  for (std::size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
  return y;
}

// Subgradient at exactly zero is zero.
inline Tensor3 relu_backward(const Tensor3& x, const Tensor3& grad_out) {
  if (!x.same_shape(grad_out)) fail(ErrorKind::ShapeMismatch, "relu backward: shape mismatch");
  Tensor3 g(x.n, x.c, x.l);
  for (std::size_t i = 0; i < x.size(); ++i) g.v[i] = x.v[i] > 0.0 ? grad_out.v[i] : 0.0;
  return g;
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

struct MaxPoolCache {
  std::vector<std::int32_t> argmax;  // input index per output element
  int in_len = 0;
  int kernel = 0;
  int stride = 0;
};

inline Tensor3 maxpool1d_forward(const Tensor3& x, int kernel, int stride, MaxPoolCache* cache = nullptr) {
  if (kernel < 1 || stride < 1) fail(ErrorKind::ShapeMismatch, "maxpool: bad kernel/stride");
  if (kernel > x.l) fail(ErrorKind::WindowLargerThanInput, "maxpool window exceeds input length");
  const int out_len = (x.l - kernel) / stride + 1;
  Tensor3 y(x.n, x.c, out_len);
  if (cache) {
    cache->argmax.assign(y.size(), 0);
    cache->in_len = x.l;
    cache->kernel = kernel;
    cache->stride = stride;
  }
  for (int ni = 0; ni < x.n; ++ni) {
    for (int c = 0; c < x.c; ++c) {
      const double* xr = x.row(ni, c);
      double* yr = y.row(ni, c);
      std::int32_t* am = cache ? cache->argmax.data() + (static_cast<std::size_t>(ni) * x.c + c) * out_len : nullptr;
      for (int i = 0; i < out_len; ++i) {
        int best = i * stride;
        double bv = xr[best];
        for (int t = 1; t < kernel; ++t) {
          const int q = i * stride + t;
          if (xr[q] > bv) {  // ties keep the first index
            bv = xr[q];
            best = q;
          }
        }
        yr[i] = bv;
        if (am) am[i] = best;
      }
    }
  }
  return y;
}

inline Tensor3 maxpool1d_backward(const MaxPoolCache& cache, const Tensor3& grad_out) {
  const int out_len = (cache.in_len - cache.kernel) / cache.stride + 1;
  if (grad_out.l != out_len || cache.argmax.size() != grad_out.size())
    fail(ErrorKind::ShapeMismatch, "maxpool backward: shape mismatch");
  Tensor3 g(grad_out.n, grad_out.c, cache.in_len);
  for (int ni = 0; ni < grad_out.n; ++ni) {
    for (int c = 0; c < grad_out.c; ++c) {
      const double* gy = grad_out.row(ni, c);
      const std::int32_t* am = cache.argmax.data() + (static_cast<std::size_t>(ni) * grad_out.c + c) * out_len;
      double* gx = g.row(ni, c);
      for (int i = 0; i < out_len; ++i) gx[am[i]] += gy[i];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adaptive average pooling: output bin i averages input [i*L/H, (i+1)*L/H)
// ---------------------------------------------------------------------------

inline Tensor3 adaptive_avgpool_forward(const Tensor3& x, int out_len) {
  if (out_len < 1 || out_len > x.l) fail(ErrorKind::ShapeMismatch, "adaptive pool: bad output size");
  Tensor3 y(x.n, x.c, out_len);
  for (int ni = 0; ni < x.n; ++ni) {
    for (int c = 0; c < x.c; ++c) {
      const double* xr = x.row(ni, c);
      double* yr = y.row(ni, c);
      for (int i = 0; i < out_len; ++i) {
        const int lo = static_cast<int>(static_cast<std::int64_t>(i) * x.l / out_len);
        const int hi = static_cast<int>(static_cast<std::int64_t>(i + 1) * x.l / out_len);
        double sum = 0.0;
        for (int q = lo; q < hi; ++q) sum += xr[q];
        yr[i] = sum / static_cast<double>(hi - lo);
      }
    }
  }
  return y;
}

inline Tensor3 adaptive_avgpool_backward(int in_len, const Tensor3& grad_out) {
  Tensor3 g(grad_out.n, grad_out.c, in_len);
  for (int ni = 0; ni < grad_out.n; ++ni) {
    for (int c = 0; c < grad_out.c; ++c) {
      const double* gy = grad_out.row(ni, c);
      double* gx = g.row(ni, c);
      for (int i = 0; i < grad_out.l; ++i) {
        const int lo = static_cast<int>(static_cast<std::int64_t>(i) * in_len / grad_out.l);
        const int hi = static_cast<int>(static_cast<std::int64_t>(i + 1) * in_len / grad_out.l);
        const double share = gy[i] / static_cast<double>(hi - lo);
        for (int q = lo; q < hi; ++q) gx[q] += share;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fully connected layer: y = x * W^T + b
// ---------------------------------------------------------------------------

struct LinearParams {
  Matrix weight;             // (out, in)
  std::vector<double> bias;  // (out)

  int out_features() const { return weight.rows; }
  int in_features() const { return weight.cols; }
};

inline Matrix linear_forward(const Matrix& x, const LinearParams& p) {
  if (x.cols != p.in_features()) fail(ErrorKind::ShapeMismatch, "linear: feature mismatch");
  Matrix y(x.rows, p.out_features());
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* yr = y.row(r);
    for (int o = 0; o < p.out_features(); ++o) {
      const double* w = p.weight.row(o);
      double acc = p.bias[o];
      for (int i = 0; i < x.cols; ++i) acc = std::fma(w[i], xr[i], acc);
      yr[o] = acc;
    }
  }
  return y;
}

struct LinearGrads {
  Matrix x;
  Matrix weight;
  std::vector<double> bias;
};

inline LinearGrads linear_backward(const Matrix& x, const LinearParams& p, const Matrix& grad_out) {
  if (grad_out.rows != x.rows || grad_out.cols != p.out_features())
    fail(ErrorKind::ShapeMismatch, "linear backward: shape mismatch");
  LinearGrads g;
  g.x = Matrix(x.rows, x.cols);
  g.weight = Matrix(p.out_features(), p.in_features());
  g.bias.assign(p.out_features(), 0.0);
  for (int r = 0; r < x.rows; ++r) {
    const double* gy = grad_out.row(r);
    const double* xr = x.row(r);
    double* gx = g.x.row(r);
    for (int o = 0; o < p.out_features(); ++o) {
      const double gv = gy[o];
      g.bias[o] += gv;
      const double* w = p.weight.row(o);
      double* gw = g.weight.row(o);
      for (int i = 0; i < x.cols; ++i) {
        gx[i] = std::fma(gv, w[i], gx[i]);
        gw[i] = std::fma(gv, xr[i], gw[i]);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Softmax and cross-entropy
// ---------------------------------------------------------------------------

inline Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    const double* lr = logits.row(r);
    double* pr = p.row(r);
    double mx = lr[0];
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, lr[c]);
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      pr[c] = std::exp(lr[c] - mx);
      sum += pr[c];
    }
    for (int c = 0; c < logits.cols; ++c) pr[c] /= sum;
  }
  return p;
}

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad_logits;
};

// loss = -(1/N) sum log p[true]; grad = (p - onehot)/N; log clamped at 1e-12.
inline CrossEntropyResult cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    fail(ErrorKind::LengthMismatch, "cross_entropy: label count mismatch");
  for (int lb : labels)
    if (lb < 0 || lb >= logits.cols) fail(ErrorKind::LabelOutOfRange, "cross_entropy: label out of range");

  CrossEntropyResult r;
  r.grad_logits = softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  double loss = 0.0;
  for (int row = 0; row < logits.rows; ++row) {
    double* pr = r.grad_logits.row(row);
    loss -= std::log(std::max(pr[labels[row]], 1e-12));
    for (int c = 0; c < logits.cols; ++c) pr[c] *= inv_n;
    pr[labels[row]] -= inv_n;
  }
  r.loss = loss * inv_n;
  return r;
}

}  // namespace dhrn
