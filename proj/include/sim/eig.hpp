#pragma once

#include <complex>
#include <vector>

#include "sim/matrix.hpp"

namespace sim {

/// Eigenvalues and right eigenvectors of a real square matrix.
///
/// Eigenvalues are sorted by descending modulus, ties broken by descending
/// real part, then conjugate member with positive imaginary part first.
/// Eigenvectors are unit L2 norm with the first significant component
/// rotated to the positive real axis (fixes the phase gauge).
struct EigenDecomposition {
  std::vector<std::complex<double>> eigenvalues;
  // eigenvectors[j] is the column vector for eigenvalues[j]
  std::vector<std::vector<std::complex<double>>> eigenvectors;
  // conj_partner[j] = index of the conjugate eigenvalue for non-real pairs,
  // -1 for real eigenvalues. Pairs are matched by provenance (same 2x2 Schur
  // block), not by value, so duplicated pairs stay correctly matched.
  std::vector<int> conj_partner;
  bool converged = true;
};

/// Francis double-shift QR on the Hessenberg form, eigenvectors by
/// back-substitution in the quasi-triangular factor.
/// Throws NonSquareError, NoConvergenceError (after 100*N sweeps).
EigenDecomposition eig(const Matrix& a);

}  // namespace sim
