#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "dhrn/errors.hpp"

namespace dhrn {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place radix-2 Cooley-Tukey. Size must be a power of two. The inverse
// transform includes the 1/n scale.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false) {
  const std::size_t n = a.size();
  if (n == 0) fail(ErrorKind::NonFiniteInput, "fft of empty buffer");
  if ((n & (n - 1)) != 0) fail(ErrorKind::ShapeMismatch, "fft size must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> t = a[i + j + len / 2] * w;
        a[i + j] = u + t;
        a[i + j + len / 2] = u - t;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

// One-sided complex spectrum of a real window, zero-padded to the next power
// of two. Returns bins 0..P/2 (length P/2 + 1).
inline std::vector<std::complex<double>> rfft_complex(const std::vector<double>& window) {
  if (window.empty()) fail(ErrorKind::NonFiniteInput, "empty window");
  for (double x : window)
    if (!std::isfinite(x)) fail(ErrorKind::NonFiniteInput, "non-finite sample in window");
  const std::size_t p = next_pow2(window.size());
  std::vector<std::complex<double>> buf(p, {0.0, 0.0});
  for (std::size_t i = 0; i < window.size(); ++i) buf[i] = {window[i], 0.0};
  fft_inplace(buf);
  buf.resize(p / 2 + 1);
  return buf;
}

// One-sided magnitude spectrum |X[k]|, k = 0..P/2.
inline std::vector<double> rfft_magnitude(const std::vector<double>& window) {
  const auto spec = rfft_complex(window);
  std::vector<double> mag(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) mag[i] = std::abs(spec[i]);
  return mag;
}

}  // namespace dhrn
