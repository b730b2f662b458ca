#include "sim/spectra.hpp"

#include <cmath>

#include "nlohmann/json.hpp"
#include "sim/solve.hpp"
#include "sim/svd.hpp"

namespace sim {

std::string to_string(ConvergenceClass c) {
  switch (c) {
    case ConvergenceClass::ConvergesToOrigin:
      return "ConvergesToOrigin";
    case ConvergenceClass::ConvergesToFixedPoint:
      return "ConvergesToFixedPoint";
    case ConvergenceClass::ConvergesToInvariantSet:
      return "ConvergesToInvariantSet";
    case ConvergenceClass::Unstable:
      return "Unstable";
  }
  return "?";
}

namespace {

// Real basis matrix U: one column per sorted eigenvalue; a conjugate pair
// contributes the real part (positive-imaginary member) and the imaginary
// part (its partner), so A = U J U^-1 with J in real block form.
Matrix real_basis(const EigenDecomposition& d) {
  const std::size_t n = d.eigenvalues.size();
  Matrix u(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    if (d.conj_partner[j] < 0) {
      for (std::size_t i = 0; i < n; ++i) u(i, j) = d.eigenvectors[j][i].real();
    } else if (d.eigenvalues[j].imag() > 0.0) {
      for (std::size_t i = 0; i < n; ++i) u(i, j) = d.eigenvectors[j][i].real();
    } else {
      const std::size_t p = (std::size_t)d.conj_partner[j];
      for (std::size_t i = 0; i < n; ++i) u(i, j) = d.eigenvectors[p][i].imag();
    }
  }
  return u;
}

// Biorthogonal basis of the unit-modulus eigenspace: U holds the real-form
// right eigenvectors (columns, in sorted index order), V satisfies V U = I
// and annihilates the complementary invariant subspace, so A^l U V = U B(l) V
// for the block-diagonal B(l). Built from left eigenvectors (eigenvectors of
// A^T) rather than a full-basis inverse: sub-unit eigenvalues may be
// defective without affecting the limit.
struct UnitBasis {
  Matrix u;  // n x r
  Matrix v;  // r x n
};

UnitBasis unit_basis(const Matrix& a, const EigenDecomposition& d,
                     const std::vector<std::size_t>& unit, double eig_tol) {
  const std::size_t n = a.rows;
  const std::size_t r = unit.size();
  const Matrix full = real_basis(d);
  Matrix u(n, r);
  for (std::size_t c = 0; c < r; ++c)
    for (std::size_t i = 0; i < n; ++i) u(i, c) = full(i, unit[c]);

  const EigenDecomposition dt = eig(transpose(a));
  std::vector<std::size_t> unit_t;
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(std::abs(dt.eigenvalues[j]) - 1.0) <= eig_tol)
      unit_t.push_back(j);
  if (unit_t.size() != r)
    throw NoConvergenceError(
        "unit eigenspace dimension mismatch between A and A^T");
  const Matrix full_t = real_basis(dt);
  Matrix w(n, r);
  for (std::size_t c = 0; c < r; ++c)
    for (std::size_t i = 0; i < n; ++i) w(i, c) = full_t(i, unit_t[c]);

  UnitBasis out;
  out.v = solve_linear(matmul(transpose(w), u), transpose(w));
  out.u = std::move(u);
  return out;
}

// Geometric multiplicity of lambda as an eigenvalue of A. For complex
// lambda the rank is taken on the real 2N x 2N embedding of A - lambda I.
std::size_t geometric_multiplicity(const Matrix& a, std::complex<double> lam,
                                   double tol) {
  const std::size_t n = a.rows;
  if (std::abs(lam.imag()) <= tol) {
    Matrix m = a;
    for (std::size_t i = 0; i < n; ++i) m(i, i) -= lam.real();
    return n - numeric_rank(m, tol);
  }
  Matrix m(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      m(i, j) = a(i, j);
      m(n + i, n + j) = a(i, j);
    }
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) -= lam.real();
    m(n + i, n + i) -= lam.real();
    m(i, n + i) = lam.imag();
    m(n + i, i) = -lam.imag();
  }
  return (2 * n - numeric_rank(m, tol)) / 2;
}

struct Analysis {
  SpectrumReport report;
  EigenDecomposition decomp;
  std::vector<std::size_t> unit;  // sorted 0-based unit-modulus indices
};

Analysis analyze(const Matrix& a, double eig_tol) {
  if (!a.square()) throw NonSquareError("classify: matrix must be square");
  if (!(eig_tol > 0.0 && eig_tol < 0.1))
    throw BadConfigError("classify: eig_tol must lie in (0, 0.1)");

  Analysis out;
  out.decomp = eig(a);
  const auto& lam = out.decomp.eigenvalues;
  const std::size_t n = lam.size();

  SpectrumReport& r = out.report;
  r.eigenvalues = lam;
  r.spectral_radius = 0.0;
  for (const auto& l : lam)
    r.spectral_radius = std::max(r.spectral_radius, std::abs(l));

  if (r.spectral_radius < 1.0 - eig_tol) {
    r.cls = ConvergenceClass::ConvergesToOrigin;
    r.projector = Matrix::zeros(n, n);
    return out;
  }
  if (r.spectral_radius > 1.0 + eig_tol) {
    r.cls = ConvergenceClass::Unstable;
    return out;
  }

  std::vector<std::size_t>& unit = out.unit;
  for (std::size_t j = 0; j < n; ++j) {
    if (std::abs(std::abs(lam[j]) - 1.0) > eig_tol) continue;
    unit.push_back(j);
    if (std::abs(lam[j] - 1.0) <= eig_tol) {
      r.J1.push_back(j + 1);
    } else if (std::abs(lam[j] + 1.0) <= eig_tol) {
      r.J2.push_back(j + 1);
    } else if (lam[j].imag() > eig_tol) {
      OscillationPair p;
      p.j = j + 1;
      p.k = (std::size_t)out.decomp.conj_partner[j] + 1;
      p.delta = std::atan2(lam[j].imag(), lam[j].real());
      r.J3.push_back(p);
    }
  }

  // defectiveness: cluster unit-modulus eigenvalues (2*tol linkage) and
  // compare geometric against algebraic multiplicity per cluster
  std::vector<bool> seen(n, false);
  for (std::size_t j : unit) {
    if (seen[j] || lam[j].imag() < -eig_tol) continue;
    std::vector<std::size_t> cluster{j};
    seen[j] = true;
    bool grew = true;
    while (grew) {
      grew = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (seen[k]) continue;
        for (std::size_t c : cluster)
          if (std::abs(lam[k] - lam[c]) <= 2.0 * eig_tol) {
            cluster.push_back(k);
            seen[k] = true;
            grew = true;
            break;
          }
      }
    }
    std::complex<double> rep{0.0, 0.0};
    for (std::size_t c : cluster) rep += lam[c];
    rep /= (double)cluster.size();
    if (geometric_multiplicity(a, rep, eig_tol) < cluster.size()) {
      r.cls = ConvergenceClass::Unstable;
      r.defect_detected = true;
      r.J1.clear();
      r.J2.clear();
      r.J3.clear();
      return out;
    }
  }

  r.cls = (r.J2.empty() && r.J3.empty())
              ? ConvergenceClass::ConvergesToFixedPoint
              : ConvergenceClass::ConvergesToInvariantSet;

  if (r.cls == ConvergenceClass::ConvergesToFixedPoint) {
    const UnitBasis ub = unit_basis(a, out.decomp, unit, eig_tol);
    r.projector = matmul(ub.u, ub.v);
  }
  return out;
}

}  // namespace

SpectrumReport classify(const Matrix& a, double eig_tol) {
  return analyze(a, eig_tol).report;
}

Matrix fixed_point_projector(const Matrix& a, double eig_tol) {
  const Analysis an = analyze(a, eig_tol);
  if (an.report.cls == ConvergenceClass::ConvergesToOrigin ||
      an.report.cls == ConvergenceClass::ConvergesToFixedPoint)
    return *an.report.projector;
  throw NotApplicableError(
      "fixed_point_projector: class is " + to_string(an.report.cls));
}

Matrix oscillation_term(const Matrix& a, unsigned long l, double eig_tol) {
  const Analysis an = analyze(a, eig_tol);
  const auto& r = an.report;
  if (r.cls != ConvergenceClass::ConvergesToInvariantSet &&
      r.cls != ConvergenceClass::ConvergesToFixedPoint)
    throw NotApplicableError("oscillation_term: class is " + to_string(r.cls));

  const UnitBasis ub = unit_basis(a, an.decomp, an.unit, eig_tol);
  const std::size_t rdim = an.unit.size();
  auto pos = [&](std::size_t idx) {
    for (std::size_t c = 0; c < rdim; ++c)
      if (an.unit[c] == idx) return c;
    throw NotApplicableError("oscillation_term: internal index mismatch");
  };
  Matrix b = Matrix::zeros(rdim, rdim);
  const double sign = (l % 2 == 0) ? 1.0 : -1.0;
  for (std::size_t idx : r.J1) b(pos(idx - 1), pos(idx - 1)) = 1.0;
  for (std::size_t idx : r.J2) b(pos(idx - 1), pos(idx - 1)) = sign;
  for (const auto& p : r.J3) {
    const double c = std::cos((double)l * p.delta);
    const double s = std::sin((double)l * p.delta);
    const std::size_t j = pos(p.j - 1), k = pos(p.k - 1);
    // rotation block through angle l*delta in the (real, imag) column pair
    b(j, j) = c;
    b(j, k) = s;
    b(k, j) = -s;
    b(k, k) = c;
  }
  return matmul(matmul(ub.u, b), ub.v);
}

std::vector<std::vector<double>> simulate_lifted(const Matrix& a,
                                                 std::span<const double> phi0,
                                                 unsigned long steps) {
  if (!a.square()) throw NonSquareError("simulate_lifted: A must be square");
  if (phi0.size() != a.rows)
    throw DimensionError("simulate_lifted: phi0 dimension mismatch");
  std::vector<std::vector<double>> traj;
  traj.reserve(steps + 1);
  traj.emplace_back(phi0.begin(), phi0.end());
  for (unsigned long l = 0; l < steps; ++l)
    traj.push_back(matvec(a, traj.back()));
  return traj;
}

double spectral_radius(const Matrix& a) {
  if (!a.square()) throw NonSquareError("spectral_radius: A must be square");
  double rho = 0.0;
  for (const auto& l : eig(a).eigenvalues) rho = std::max(rho, std::abs(l));
  return rho;
}

nlohmann::json report_to_json(const SpectrumReport& r) {
  nlohmann::json j;
  j["class"] = to_string(r.cls);
  auto& ev = j["eigenvalues"] = nlohmann::json::array();
  for (const auto& l : r.eigenvalues) ev.push_back({l.real(), l.imag()});
  j["spectral_radius"] = r.spectral_radius;
  j["J1"] = r.J1;
  j["J2"] = r.J2;
  auto& j3 = j["J3"] = nlohmann::json::array();
  for (const auto& p : r.J3) j3.push_back({(double)p.j, (double)p.k, p.delta});
  if (r.projector) {
    auto& pj = j["projector"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.projector->rows; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t c = 0; c < r.projector->cols; ++c)
        row.push_back((*r.projector)(i, c));
      pj.push_back(row);
    }
  } else {
    j["projector"] = nullptr;
  }
  j["defect_detected"] = r.defect_detected;
  return j;
}

}  // namespace sim
