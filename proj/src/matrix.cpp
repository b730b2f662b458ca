#include "sim/matrix.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

namespace sim {

bool Matrix::finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool approx_equal(const Matrix& a, const Matrix& b, double atol) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (std::abs(a.data[i] - b.data[i]) > atol) return false;
  return true;
}

static void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw DimensionError("matrix shape mismatch");
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b);
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b);
  Matrix c = a;
  for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

static void check_mul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions differ");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_mul(a, b);
  Matrix c(a.rows, b.cols);
  if (a.rows == 0 || b.cols == 0 || a.cols == 0) return c;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)a.rows,
              (int)b.cols, (int)a.cols, 1.0, a.data.data(), (int)a.cols,
              b.data.data(), (int)b.cols, 0.0, c.data.data(), (int)c.cols);
  return c;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  check_mul(a, b);
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  return c;
}

Matrix matmul_omp(const Matrix& a, const Matrix& b) {
  check_mul(a, b);
  Matrix c(a.rows, b.cols);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a((std::size_t)i, k);
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[(std::size_t)i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  return c;
}

void matmul_into(const Matrix& a, const Matrix& b, Matrix& out,
                 bool transpose_a, bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols : a.rows;
  const std::size_t ka = transpose_a ? a.rows : a.cols;
  const std::size_t kb = transpose_b ? b.cols : b.rows;
  const std::size_t n = transpose_b ? b.rows : b.cols;
  if (ka != kb) throw DimensionError("matmul_into: inner dimensions differ");
  if (out.rows != m || out.cols != n)
    throw DimensionError("matmul_into: output shape mismatch");
  if (m == 0 || n == 0) return;
  if (ka == 0) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return;
  }
  cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
              transpose_b ? CblasTrans : CblasNoTrans, (int)m, (int)n, (int)ka,
              1.0, a.data.data(), (int)a.cols, b.data.data(), (int)b.cols, 0.0,
              out.data.data(), (int)out.cols);
}

void matmul_accumulate(const Matrix& a, const Matrix& b, Matrix& out,
                       bool transpose_a, bool transpose_b) {
  const std::size_t m = transpose_a ? a.cols : a.rows;
  const std::size_t ka = transpose_a ? a.rows : a.cols;
  const std::size_t kb = transpose_b ? b.cols : b.rows;
  const std::size_t n = transpose_b ? b.rows : b.cols;
  if (ka != kb)
    throw DimensionError("matmul_accumulate: inner dimensions differ");
  if (out.rows != m || out.cols != n)
    throw DimensionError("matmul_accumulate: output shape mismatch");
  if (m == 0 || n == 0 || ka == 0) return;
  cblas_dgemm(CblasRowMajor, transpose_a ? CblasTrans : CblasNoTrans,
              transpose_b ? CblasTrans : CblasNoTrans, (int)m, (int)n, (int)ka,
              1.0, a.data.data(), (int)a.cols, b.data.data(), (int)b.cols, 1.0,
              out.data.data(), (int)out.cols);
}

void accumulate(Matrix& dst, const Matrix& src) {
  check_same_shape(dst, src);
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

std::vector<double> matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols != x.size()) throw DimensionError("matvec: dimension mismatch");
  std::vector<double> y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

Matrix matpow(const Matrix& a, unsigned long l) {
  if (!a.square()) throw NonSquareError("matpow: matrix must be square");
  Matrix result = Matrix::identity(a.rows);
  Matrix base = a;
  while (l > 0) {
    if (l & 1UL) result = matmul(result, base);
    l >>= 1UL;
    if (l > 0) base = matmul(base, base);
  }
  return result;
}

}  // namespace sim
