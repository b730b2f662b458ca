#pragma once

#include <iosfwd>
#include <string>

#include "sim/matrix.hpp"

namespace sim {

// Matrix text format: one row per line, comma separated, '.' decimal, no
// header. Ragged rows are rejected.
Matrix parse_matrix_csv(std::istream& in);
Matrix load_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& m, std::ostream& out);

/// Shortest round-trip decimal formatting for a double ("%.17g" fallback).
std::string format_double(double v);

}  // namespace sim
