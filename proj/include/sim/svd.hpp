#pragma once

#include "sim/matrix.hpp"

namespace sim {

/// Singular values in descending order, one-sided Jacobi.
std::vector<double> singular_values(const Matrix& a);

/// Number of singular values greater than tol * sigma_max.
std::size_t numeric_rank(const Matrix& a, double tol);

}  // namespace sim
