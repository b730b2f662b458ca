#pragma once

#include "sim/matrix.hpp"

namespace sim {

/// Solve A X = B by LU with partial pivoting.
/// Throws SingularError when a pivot falls below 1e-12 * ||A||_F.
Matrix solve_linear(const Matrix& a, const Matrix& b);

}  // namespace sim
