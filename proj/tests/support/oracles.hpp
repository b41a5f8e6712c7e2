#pragma once

// Reference implementations the production code is checked against. These are
// deliberately the dumbest possible loops and share nothing with the library
// beyond the zero-padding convention and fma accumulation order.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "dhrn/tensor.hpp"

namespace oracle {

inline std::size_t pow2_at_least(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p *= 2;
  return p;
}

// Direct O(n^2) DFT magnitudes of the zero-padded window, bins 0..P/2.
inline std::vector<double> dft_magnitude(const std::vector<double>& window) {
  const std::size_t p = pow2_at_least(window.size());
  std::vector<double> mag(p / 2 + 1, 0.0);
  for (std::size_t k = 0; k <= p / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < window.size(); ++n) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(n) /
                         static_cast<double>(p);
      re += window[n] * std::cos(ang);
      im += window[n] * std::sin(ang);
    }
    mag[k] = std::hypot(re, im);
  }
  return mag;
}

// Direct O(n^2) complex DFT, one-sided, zero-padded.
inline std::vector<std::complex<double>> dft_complex(const std::vector<double>& window) {
  const std::size_t p = pow2_at_least(window.size());
  std::vector<std::complex<double>> out(p / 2 + 1);
  for (std::size_t k = 0; k <= p / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < window.size(); ++n) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(n) /
                         static_cast<double>(p);
      re += window[n] * std::cos(ang);
      im += window[n] * std::sin(ang);
    }
    out[k] = {re, im};
  }
  return out;
}

// Naive nested-loop 1-D cross-correlation with explicit zero padding. The
// accumulation per output element is bias-first, channel-major, tap-minor fma,
// matching the contract the fast kernels must honor bit for bit.
inline dhrn::Tensor3 conv1d_naive(const dhrn::Tensor3& x, const dhrn::Tensor3& w, const std::vector<double>& bias,
                                  int stride, int pad_left, int pad_right) {
  const int kout = w.n, cin = w.c, kk = w.l;
  const int lp = x.l + pad_left + pad_right;
  const int out_len = (lp - kk) / stride + 1;
  dhrn::Tensor3 y(x.n, kout, out_len);
  std::vector<double> padded(static_cast<std::size_t>(lp), 0.0);
  for (int ni = 0; ni < x.n; ++ni) {
    for (int j = 0; j < kout; ++j) {
      for (int i = 0; i < out_len; ++i) {
        double acc = bias[static_cast<std::size_t>(j)];
        for (int c = 0; c < cin; ++c) {
          for (int q = 0; q < lp; ++q) padded[static_cast<std::size_t>(q)] = 0.0;
          for (int q = 0; q < x.l; ++q) padded[static_cast<std::size_t>(q + pad_left)] = x.at(ni, c, q);
          for (int t = 0; t < kk; ++t)
            acc = std::fma(w.at(j, c, t), padded[static_cast<std::size_t>(i * stride + t)], acc);
        }
        y.at(ni, j, i) = acc;
      }
    }
  }
  return y;
}

}  // namespace oracle
