#include "sim/svd.hpp"

#include <algorithm>
#include <cmath>

namespace sim {

std::vector<double> singular_values(const Matrix& a) {
  // work on the tall orientation so columns are the short dimension
  Matrix w = a.rows >= a.cols ? a : transpose(a);
  const std::size_t m = w.rows, n = w.cols;

  // one-sided Jacobi: orthogonalize column pairs until all inner products
  // are negligible
  const double eps = 1e-14;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = w(i, p), xq = w(i, q);
          app += xp * xp;
          aqq += xq * xq;
          apq += xp * xq;
        }
        if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double xp = w(i, p), xq = w(i, q);
          w(i, p) = c * xp - s * xq;
          w(i, q) = s * xp + c * xq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

std::size_t numeric_rank(const Matrix& a, double tol) {
  if (a.data.empty()) return 0;
  const auto sigma = singular_values(a);
  const double cutoff = tol * sigma.front();
  std::size_t r = 0;
  for (double s : sigma)
    if (s > cutoff && s > 0.0) ++r;
  return r;
}

}  // namespace sim
