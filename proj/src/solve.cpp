#include "sim/solve.hpp"

#include <cmath>
#include <numeric>

namespace sim {

Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (!a.square()) throw NonSquareError("solve_linear: A must be square");
  if (a.rows != b.rows)
    throw DimensionError("solve_linear: row counts differ");
  const std::size_t n = a.rows;
  const double pivot_floor = 1e-12 * frobenius_norm(a);

  Matrix lu = a;
  Matrix x = b;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (std::abs(lu(piv, k)) <= pivot_floor)
      throw SingularError("solve_linear: singular to working precision");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      for (std::size_t j = 0; j < x.cols; ++j) std::swap(x(k, j), x(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      lu(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < x.cols; ++j) x(i, j) -= f * x(k, j);
    }
  }

  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = 0; j < x.cols; ++j) {
      double s = x(k, j);
      for (std::size_t i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
      x(k, j) = s / lu(k, k);
    }
  }
  return x;
}

}  // namespace sim
