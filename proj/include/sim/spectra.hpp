#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "sim/eig.hpp"
#include "sim/matrix.hpp"

namespace sim {

enum class ConvergenceClass {
  ConvergesToOrigin,
  ConvergesToFixedPoint,
  ConvergesToInvariantSet,
  Unstable,
};

std::string to_string(ConvergenceClass c);

/// Conjugate pair of unit-modulus eigenvalues; j is the positive-imaginary
/// member, delta its angle atan2(beta, alpha). Indices are 1-based.
struct OscillationPair {
  std::size_t j = 0;
  std::size_t k = 0;
  double delta = 0.0;
};

struct SpectrumReport {
  ConvergenceClass cls = ConvergenceClass::Unstable;
  std::vector<std::complex<double>> eigenvalues;  // sorted as in eig()
  double spectral_radius = 0.0;
  std::vector<std::size_t> J1;  // 1-based indices with lambda == 1
  std::vector<std::size_t> J2;  // 1-based indices with lambda == -1
  std::vector<OscillationPair> J3;
  std::optional<Matrix> projector;  // present for Origin / FixedPoint
  bool defect_detected = false;
};

/// Classify the limiting behavior of A^l. Decision order: spectral radius
/// against 1 +- eig_tol, then partition of unit-modulus eigenvalues into
/// J1/J2/J3, then a rank test per eigenvalue cluster (geometric vs algebraic
/// multiplicity); a defective unit eigenvalue forces Unstable.
SpectrumReport classify(const Matrix& a, double eig_tol = 1e-8);

/// P = sum over J1 of u_j v_j^T; the limit of A^l in the convergent cases
/// (zero matrix when the spectrum is strictly inside the unit circle).
Matrix fixed_point_projector(const Matrix& a, double eig_tol = 1e-8);

/// The bounded part of A^l: J1 projector, (-1)^l J2 term, and the J3
/// rotation terms evaluated at step l. ||A^l - M(l)|| decays with the
/// largest sub-unit modulus.
Matrix oscillation_term(const Matrix& a, unsigned long l, double eig_tol = 1e-8);

/// [phi0, A phi0, ..., A^L phi0] by repeated multiplication.
std::vector<std::vector<double>> simulate_lifted(const Matrix& a,
                                                 std::span<const double> phi0,
                                                 unsigned long steps);

double spectral_radius(const Matrix& a);

nlohmann::json report_to_json(const SpectrumReport& r);

}  // namespace sim
