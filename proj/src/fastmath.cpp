// Built with -ffast-math (see CMakeLists) so the compiler can substitute the
// glibc vector sin/cos kernels. Kept to plain elementwise loops: the flag
// must not touch any code where IEEE ordering semantics matter.
#include "sim/fastmath.hpp"

#include <cmath>

namespace sim::detail {

void sin_array(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(x[i]);
}

void cos_array(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::cos(x[i]);
}

}  // namespace sim::detail
