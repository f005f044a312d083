// Minimal dense linear algebra used by the online solver: Gaussian
// elimination with partial pivoting on row-major square systems.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ehpc::linalg {

/// Solves A x = b in place on copies; A is n x n row-major.
inline std::vector<double> solve_dense(std::vector<double> a,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n)
    throw std::invalid_argument("solve_dense: dimension mismatch");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a[perm[col] * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(a[perm[r] * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw std::logic_error("solve_dense: singular matrix");
    std::swap(perm[col], perm[piv]);
    const std::size_t prow = perm[col];
    const double diag = a[prow * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const std::size_t row = perm[r];
      const double f = a[row * n + col] / diag;
      if (f == 0.0) continue;
      a[row * n + col] = 0.0;
      for (std::size_t c = col + 1; c < n; ++c) a[row * n + c] -= f * a[prow * n + c];
      b[row] -= f * b[prow];
    }
  }

  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t row = perm[i];
    double s = b[row];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[row * n + c] * x[c];
    x[i] = s / a[row * n + i];
  }
  return x;
}

}  // namespace ehpc::linalg
