#pragma once

#include <cstddef>

namespace sim::detail {

// Vectorised elementwise trigonometry (compiled with aggressive math flags
// in its own translation unit so the vector libm kernels are used). Every
// caller that must agree bitwise with another routes through these.
void sin_array(const double* x, double* out, std::size_t n);
void cos_array(const double* x, double* out, std::size_t n);

}  // namespace sim::detail
