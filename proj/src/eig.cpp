#include "sim/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sim {

namespace {

// Householder reduction to Hessenberg form with accumulation of the
// orthogonal transformation in v.
void hessenberg(Matrix& h, Matrix& v) {
  const int n = (int)h.rows;
  const int low = 0, high = n - 1;
  std::vector<double> ort(n, 0.0);

  for (int m = low + 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (int i = m; i <= high; ++i) scale += std::abs(h(i, m - 1));
    if (scale == 0.0) continue;

    double hh = 0.0;
    for (int i = high; i >= m; --i) {
      ort[i] = h(i, m - 1) / scale;
      hh += ort[i] * ort[i];
    }
    double g = std::sqrt(hh);
    if (ort[m] > 0) g = -g;
    hh -= ort[m] * g;
    ort[m] -= g;

    for (int j = m; j < n; ++j) {
      double f = 0.0;
      for (int i = high; i >= m; --i) f += ort[i] * h(i, j);
      f /= hh;
      for (int i = m; i <= high; ++i) h(i, j) -= f * ort[i];
    }
    for (int i = 0; i <= high; ++i) {
      double f = 0.0;
      for (int j = high; j >= m; --j) f += ort[j] * h(i, j);
      f /= hh;
      for (int j = m; j <= high; ++j) h(i, j) -= f * ort[j];
    }
    ort[m] = scale * ort[m];
    h(m, m - 1) = scale * g;
  }

  v = Matrix::identity(n);
  for (int m = high - 1; m >= low + 1; --m) {
    if (h(m, m - 1) == 0.0) continue;
    for (int i = m + 1; i <= high; ++i) ort[i] = h(i, m - 1);
    for (int j = m; j <= high; ++j) {
      double g = 0.0;
      for (int i = m; i <= high; ++i) g += ort[i] * v(i, j);
      g = (g / ort[m]) / h(m, m - 1);
      for (int i = m; i <= high; ++i) v(i, j) += g * ort[i];
    }
  }
}

// Francis double-shift QR on the Hessenberg matrix h, transformations
// accumulated in v; eigenvalues land in (wr, wi) and eigenvectors of the
// original matrix in the columns of v (real Schur packing: a complex pair
// occupies two consecutive columns holding real and imaginary parts).
// Returns false when the iteration budget is exhausted.
bool hqr2(Matrix& h, Matrix& v, std::vector<double>& wr,
          std::vector<double>& wi) {
  const int n = (int)h.rows;
  const int low = 0, high = n - 1;

  double norm = 0.0;
  for (int i = 0, k = 0; i < n; k = i++)
    for (int j = k; j < n; ++j) norm += std::abs(h(i, j));

  int en = high;
  long budget = 100L * n;
  double p = 0, q = 0, r = 0, s = 0, t = 0.0, w, x, y, z = 0;

  while (en >= low) {
    int iter = 0;
    int na = en - 1;
    int enm2 = na - 1;
    bool two_roots = false;

    for (;;) {
      int l, m;
      for (l = en; l > low; --l) {
        s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
        if (s == 0.0) s = norm;
        if (s + std::abs(h(l, l - 1)) == s) break;
      }

      x = h(en, en);
      if (l == en) break;  // one root
      y = h(na, na);
      w = h(en, na) * h(na, en);
      if (l == na) {
        two_roots = true;
        break;
      }
      if (budget-- <= 0) return false;

      // exceptional shift
      if (iter == 10 || iter == 20) {
        t += x;
        for (int i = low; i <= en; ++i) h(i, i) -= x;
        s = std::abs(h(en, na)) + std::abs(h(na, enm2));
        x = 0.75 * s;
        y = x;
        w = -0.4375 * s * s;
      }
      ++iter;

      // two consecutive small sub-diagonal elements
      for (m = enm2; m >= l; --m) {
        z = h(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / h(m + 1, m) + h(m, m + 1);
        q = h(m + 1, m + 1) - z - r - s;
        r = h(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        const double tst1 =
            std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) +
                           std::abs(h(m + 1, m + 1)));
        if (tst1 + std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r)) == tst1)
          break;
      }

      for (int i = m + 2; i <= en; ++i) {
        h(i, i - 2) = 0.0;
        if (i != m + 2) h(i, i - 3) = 0.0;
      }

      // double QR step on rows l..en, columns m..en
      for (int k = m; k <= na; ++k) {
        if (k != m) {
          p = h(k, k - 1);
          q = h(k + 1, k - 1);
          r = (k != na) ? h(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0.0) s = -s;
        if (k != m)
          h(k, k - 1) = -s * x;
        else if (l != m)
          h(k, k - 1) = -h(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;

        if (k == na) {
          for (int j = k; j < n; ++j) {
            p = h(k, j) + q * h(k + 1, j);
            h(k, j) -= p * x;
            h(k + 1, j) -= p * y;
          }
          const int stop = std::min(k + 3, en);
          for (int i = 0; i <= stop; ++i) {
            p = x * h(i, k) + y * h(i, k + 1);
            h(i, k) -= p;
            h(i, k + 1) -= p * q;
          }
          for (int i = low; i <= high; ++i) {
            p = x * v(i, k) + y * v(i, k + 1);
            v(i, k) -= p;
            v(i, k + 1) -= p * q;
          }
        } else {
          for (int j = k; j < n; ++j) {
            p = h(k, j) + q * h(k + 1, j) + r * h(k + 2, j);
            h(k, j) -= p * x;
            h(k + 1, j) -= p * y;
            h(k + 2, j) -= p * z;
          }
          const int stop = std::min(k + 3, en);
          for (int i = 0; i <= stop; ++i) {
            p = x * h(i, k) + y * h(i, k + 1) + z * h(i, k + 2);
            h(i, k) -= p;
            h(i, k + 1) -= p * q;
            h(i, k + 2) -= p * r;
          }
          for (int i = low; i <= high; ++i) {
            p = x * v(i, k) + y * v(i, k + 1) + z * v(i, k + 2);
            v(i, k) -= p;
            v(i, k + 1) -= p * q;
            v(i, k + 2) -= p * r;
          }
        }
      }
    }

    if (two_roots) {
      p = (y - x) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      h(en, en) = x + t;
      x = h(en, en);
      h(na, na) = y + t;
      if (q >= 0.0) {
        // real pair: rotate the 2x2 block to triangular form
        z = (p < 0.0) ? (p - z) : (p + z);
        wr[na] = x + z;
        wr[en] = wr[na];
        if (z != 0.0) wr[en] = x - w / z;
        wi[na] = 0.0;
        wi[en] = 0.0;
        x = h(en, na);
        s = std::abs(x) + std::abs(z);
        p = x / s;
        q = z / s;
        r = std::sqrt(p * p + q * q);
        p /= r;
        q /= r;
        for (int j = na; j < n; ++j) {
          z = h(na, j);
          h(na, j) = q * z + p * h(en, j);
          h(en, j) = q * h(en, j) - p * z;
        }
        for (int i = 0; i <= en; ++i) {
          z = h(i, na);
          h(i, na) = q * z + p * h(i, en);
          h(i, en) = q * h(i, en) - p * z;
        }
        for (int i = low; i <= high; ++i) {
          z = v(i, na);
          v(i, na) = q * z + p * v(i, en);
          v(i, en) = q * v(i, en) - p * z;
        }
      } else {
        wr[na] = x + p;
        wr[en] = x + p;
        wi[na] = z;
        wi[en] = -z;
      }
      en = enm2;
    } else {
      h(en, en) = x + t;
      wr[en] = h(en, en);
      wi[en] = 0.0;
      en = na;
    }
  }

  if (norm == 0.0) return true;

  // back-substitution in the quasi-triangular factor
  for (en = n - 1; en >= 0; --en) {
    p = wr[en];
    q = wi[en];
    int na = en - 1;

    if (q < 0.0) {
      // complex vector for the pair (na, en)
      int m = na;
      if (std::abs(h(en, na)) > std::abs(h(na, en))) {
        h(na, na) = q / h(en, na);
        h(na, en) = -(h(en, en) - p) / h(en, na);
      } else {
        const std::complex<double> cc =
            std::complex<double>(0.0, -h(na, en)) /
            std::complex<double>(h(na, na) - p, q);
        h(na, na) = cc.real();
        h(na, en) = cc.imag();
      }
      h(en, na) = 0.0;
      h(en, en) = 1.0;
      for (int i = na - 1; i >= 0; --i) {
        w = h(i, i) - p;
        double ra = 0.0, sa = 0.0;
        for (int j = m; j <= en; ++j) {
          ra += h(i, j) * h(j, na);
          sa += h(i, j) * h(j, en);
        }
        if (wi[i] < 0.0) {
          z = w;
          r = ra;
          s = sa;
          continue;
        }
        m = i;
        if (wi[i] == 0.0) {
          const std::complex<double> cc =
              std::complex<double>(-ra, -sa) / std::complex<double>(w, q);
          h(i, na) = cc.real();
          h(i, en) = cc.imag();
        } else {
          x = h(i, i + 1);
          y = h(i + 1, i);
          double vr = (wr[i] - p) * (wr[i] - p) + wi[i] * wi[i] - q * q;
          double vi = (wr[i] - p) * 2.0 * q;
          if (vr == 0.0 && vi == 0.0) {
            const double tst1 =
                norm * (std::abs(w) + std::abs(q) + std::abs(x) +
                        std::abs(y) + std::abs(z));
            vr = tst1;
            double tst2;
            do {
              vr *= 0.01;
              tst2 = tst1 + vr;
            } while (tst2 > tst1);
          }
          const std::complex<double> cc =
              std::complex<double>(x * r - z * ra + q * sa,
                                   x * s - z * sa - q * ra) /
              std::complex<double>(vr, vi);
          h(i, na) = cc.real();
          h(i, en) = cc.imag();
          if (std::abs(x) > std::abs(z) + std::abs(q)) {
            h(i + 1, na) = (-ra - w * h(i, na) + q * h(i, en)) / x;
            h(i + 1, en) = (-sa - w * h(i, en) - q * h(i, na)) / x;
          } else {
            const std::complex<double> cd =
                std::complex<double>(-r - y * h(i, na), -s - y * h(i, en)) /
                std::complex<double>(z, q);
            h(i + 1, na) = cd.real();
            h(i + 1, en) = cd.imag();
          }
        }
        // overflow control
        t = std::max(std::abs(h(i, na)), std::abs(h(i, en)));
        if (t != 0.0 && t + 1.0 / t <= t) {
          for (int j = i; j <= en; ++j) {
            h(j, na) /= t;
            h(j, en) /= t;
          }
        }
      }
    } else if (q == 0.0) {
      // real vector
      int m = en;
      h(en, en) = 1.0;
      for (int i = na; i >= 0; --i) {
        w = h(i, i) - p;
        r = 0.0;
        for (int j = m; j <= en; ++j) r += h(i, j) * h(j, en);
        if (wi[i] < 0.0) {
          z = w;
          s = r;
          continue;
        }
        m = i;
        if (wi[i] == 0.0) {
          t = w;
          if (t == 0.0) {
            t = norm;
            double tst2;
            do {
              t *= 0.01;
              tst2 = norm + t;
            } while (tst2 > norm);
          }
          h(i, en) = -r / t;
        } else {
          x = h(i, i + 1);
          y = h(i + 1, i);
          const double denom =
              (wr[i] - p) * (wr[i] - p) + wi[i] * wi[i];
          t = (x * s - z * r) / denom;
          h(i, en) = t;
          if (std::abs(x) > std::abs(z))
            h(i + 1, en) = (-r - w * t) / x;
          else
            h(i + 1, en) = (-s - y * t) / z;
        }
        // overflow control
        t = std::abs(h(i, en));
        if (t != 0.0 && t + 1.0 / t <= t)
          for (int j = i; j <= en; ++j) h(j, en) /= t;
      }
    }
  }

  // multiply by the accumulated transformation to get vectors of the
  // original matrix
  for (int j = n - 1; j >= low; --j) {
    const int m = std::min(high, j);
    for (int i = low; i <= high; ++i) {
      z = 0.0;
      for (int k = low; k <= m; ++k) z += v(i, k) * h(k, j);
      v(i, j) = z;
    }
  }
  return true;
}

void gauge_normalize(std::vector<std::complex<double>>& v) {
  double maxmod = 0.0;
  for (const auto& c : v) maxmod = std::max(maxmod, std::abs(c));
  if (maxmod == 0.0) return;
  for (const auto& c : v) {
    if (std::abs(c) > 1e-12 * maxmod) {
      const std::complex<double> phase = std::conj(c) / std::abs(c);
      for (auto& e : v) e *= phase;
      break;
    }
  }
  double nrm = 0.0;
  for (const auto& c : v) nrm += std::norm(c);
  nrm = std::sqrt(nrm);
  for (auto& e : v) e /= nrm;
}

}  // namespace

EigenDecomposition eig(const Matrix& a) {
  if (!a.square()) throw NonSquareError("eig: matrix must be square");
  if (!a.finite()) throw Error("eig: non-finite entries");
  const int n = (int)a.rows;

  Matrix h = a;
  Matrix v;
  std::vector<double> wr(n, 0.0), wi(n, 0.0);
  hessenberg(h, v);
  if (!hqr2(h, v, wr, wi))
    throw NoConvergenceError("eig: QR iteration exceeded 100*N sweeps");

  // unpack real Schur eigenvector columns into complex vectors
  std::vector<std::vector<std::complex<double>>> vecs(n);
  std::vector<int> partner(n, -1);
  for (int j = 0; j < n; ++j) {
    vecs[j].resize(n);
    if (wi[j] > 0.0) {
      partner[j] = j + 1;
      partner[j + 1] = j;
      for (int i = 0; i < n; ++i)
        vecs[j][i] = {v(i, j), v(i, j + 1)};
    } else if (wi[j] < 0.0) {
      for (int i = 0; i < n; ++i)
        vecs[j][i] = {v(i, j - 1), -v(i, j)};
    } else {
      for (int i = 0; i < n; ++i) vecs[j][i] = {v(i, j), 0.0};
    }
  }
  for (auto& vec : vecs) gauge_normalize(vec);

  // sort: descending modulus, descending real part, positive-imag member of
  // a conjugate pair first
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const double mi = std::hypot(wr[i], wi[i]), mj = std::hypot(wr[j], wi[j]);
    if (mi != mj) return mi > mj;
    if (wr[i] != wr[j]) return wr[i] > wr[j];
    return wi[i] > wi[j];
  });
  std::vector<int> inv(n);
  for (int k = 0; k < n; ++k) inv[order[k]] = k;

  EigenDecomposition d;
  d.eigenvalues.resize(n);
  d.eigenvectors.resize(n);
  d.conj_partner.resize(n);
  for (int k = 0; k < n; ++k) {
    const int j = order[k];
    d.eigenvalues[k] = {wr[j], wi[j]};
    d.eigenvectors[k] = std::move(vecs[j]);
    d.conj_partner[k] = partner[j] >= 0 ? inv[partner[j]] : -1;
  }
  d.converged = true;
  return d;
}

}  // namespace sim
