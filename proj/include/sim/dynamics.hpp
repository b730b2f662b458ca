#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "sim/matrix.hpp"

namespace sim {

using Vec = std::vector<double>;

/// Weight-tied layer map z' = step(z, x).
struct IteratedMap {
  std::size_t state_dim = 0;
  std::size_t input_dim = 0;
  std::function<Vec(const Vec&, const Vec&)> step;
};

struct FixedPointResult {
  Vec z_star;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Picard iteration z <- step(z, x) until ||dz||_inf <= tol or max_iter.
/// Divergence (NaN/Inf or ||z||_inf > 1e9) reports converged = false.
FixedPointResult deq_forward(const IteratedMap& map, const Vec& x,
                             const Vec& z0, double tol,
                             std::size_t max_iter);

/// A nonlinear map together with basis functions and the matrix that
/// advances the lifted state exactly.
struct LiftedSystem {
  IteratedMap map;
  std::function<Vec(const Vec& z, const Vec& x)> basis;
  Matrix lift_matrix;
  bool exact = false;
};

/// z1' = lam*z1 + x, z2' = mu*z2 + c*z1^2 with the exact 7-dimensional lift
/// over (z1, z2, z1^2, x*z1, x^2, x, 1). Requires |lam| < 1 and |mu| < 1.
LiftedSystem toy_koopman_system(double lam, double mu, double c);

struct Dataset {
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;
  std::vector<Vec> inputs;
  std::vector<Vec> targets;
  std::size_t dropped = 0;  // samples whose fixed point did not converge
};

/// (x, z*) supervision pairs; non-convergent samples are dropped and
/// counted. Throws AllDivergedError when nothing converges on a non-empty
/// input list.
Dataset generate_fixed_point_dataset(const IteratedMap& map,
                                     const std::vector<Vec>& xs, double tol,
                                     std::size_t max_iter = 10000);

/// CSV with header x0..x{D-1},z0..z{d-1}.
void write_dataset_csv(const Dataset& d, std::ostream& out);
Dataset read_dataset_csv(std::istream& in);

}  // namespace sim
