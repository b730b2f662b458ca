#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sim/errors.hpp"

namespace sim {

/// Dense real matrix, row-major, 64-bit throughout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool square() const { return rows == cols; }
  bool finite() const;

  static Matrix identity(std::size_t n);
  static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0); }
};

bool approx_equal(const Matrix& a, const Matrix& b, double atol);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// matmul is the dgemm-backed production kernel; matmul_serial is the plain
// reference and matmul_omp the hand-written OpenMP kernel. matmul_serial and
// matmul_omp use the identical per-element accumulation order and agree
// bitwise; the benchmark tool compares all three.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_serial(const Matrix& a, const Matrix& b);
Matrix matmul_omp(const Matrix& a, const Matrix& b);

/// out = op(a) * op(b) with optional transposes, no allocation; out must be
/// pre-sized to the product shape. dgemm-backed like matmul.
void matmul_into(const Matrix& a, const Matrix& b, Matrix& out,
                 bool transpose_a, bool transpose_b);

/// dst += src elementwise.
void accumulate(Matrix& dst, const Matrix& src);
// out += op(a) * op(b) without materialising the product
void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out,
                       bool transpose_a, bool transpose_b);

Matrix transpose(const Matrix& a);
std::vector<double> matvec(const Matrix& a, std::span<const double> x);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);

/// A^l by repeated squaring; matpow(A, 0) is the identity.
Matrix matpow(const Matrix& a, unsigned long l);

}  // namespace sim
