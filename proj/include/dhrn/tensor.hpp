#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dhrn/errors.hpp"

namespace dhrn {

// Dense rank-3 array (batch, channel, length), row-major, 64-bit.
struct Tensor3 {
  int n = 0;  // batch
  int c = 0;  // channels
  int l = 0;  // length
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int n_, int c_, int l_) : n(n_), c(c_), l(l_), v(static_cast<std::size_t>(n_) * c_ * l_, 0.0) {
    if (n_ < 0 || c_ < 0 || l_ < 0) fail(ErrorKind::ShapeMismatch, "negative tensor dimension");
  }

  std::size_t size() const { return v.size(); }

  double* row(int ni, int ci) { return v.data() + (static_cast<std::size_t>(ni) * c + ci) * l; }
  const double* row(int ni, int ci) const { return v.data() + (static_cast<std::size_t>(ni) * c + ci) * l; }

  double& at(int ni, int ci, int li) { return v[(static_cast<std::size_t>(ni) * c + ci) * l + li]; }
  double at(int ni, int ci, int li) const { return v[(static_cast<std::size_t>(ni) * c + ci) * l + li]; }

  bool same_shape(const Tensor3& o) const { return n == o.n && c == o.c && l == o.l; }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// Debug-build guard for the "values stay finite" invariant; no-op in release.
inline void debug_check_finite(const Tensor3& t, const char* where) {
#ifndef NDEBUG
  if (!t.all_finite()) fail(ErrorKind::NonFiniteInput, std::string("non-finite values after ") + where);
#else
  (void)t;
  (void)where;
#endif
}

// Dense matrix (rows, cols), row-major. Used for flattened features and
// classifier heads.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

  double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

}  // namespace dhrn
