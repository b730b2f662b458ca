#include "sim/dynamics.hpp"

#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>

#include "sim/csv.hpp"
#include "sim/errors.hpp"

namespace sim {

namespace {

bool vec_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double inf_norm(const Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

FixedPointResult deq_forward(const IteratedMap& map, const Vec& x,
                             const Vec& z0, double tol,
                             std::size_t max_iter) {
  if (x.size() != map.input_dim)
    throw DimensionError("deq_forward: input dimension mismatch");
  Vec z = z0.empty() ? Vec(map.state_dim, 0.0) : z0;
  if (z.size() != map.state_dim)
    throw DimensionError("deq_forward: initial state dimension mismatch");

  FixedPointResult res;
  res.z_star = z;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Vec next = map.step(z, x);
    if (next.size() != map.state_dim)
      throw DimensionError("deq_forward: step changed the state dimension");
    double delta = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i)
      delta = std::max(delta, std::abs(next[i] - z[i]));
    z = std::move(next);
    res.iterations = it;
    res.residual = delta;
    if (!vec_finite(z) || inf_norm(z) > 1e9) {
      res.z_star = z;
      res.converged = false;
      return res;
    }
    if (delta <= tol) {
      res.z_star = z;
      res.converged = true;
      return res;
    }
  }
  res.z_star = z;
  res.converged = false;
  return res;
}

LiftedSystem toy_koopman_system(double lam, double mu, double c) {
  if (std::abs(lam) >= 1.0 || std::abs(mu) >= 1.0)
    throw UnstableParametersError(
        "toy_koopman_system: |lam| and |mu| must be < 1");

  LiftedSystem sys;
  sys.map.state_dim = 2;
  sys.map.input_dim = 1;
  sys.map.step = [lam, mu, c](const Vec& z, const Vec& x) {
    return Vec{lam * z[0] + x[0], mu * z[1] + c * z[0] * z[0]};
  };
  sys.basis = [](const Vec& z, const Vec& x) {
    return Vec{z[0], z[1], z[0] * z[0], x[0] * z[0], x[0] * x[0], x[0], 1.0};
  };

  // Basis ordering (z1, z2, z1^2, x z1, x^2, x, 1) closes under the map:
  //   z1'    = lam z1 + x
  //   z2'    = mu z2 + c z1^2
  //   z1'^2  = lam^2 z1^2 + 2 lam (x z1) + x^2
  //   x z1'  = lam (x z1) + x^2
  // and x^2, x, 1 are fixed, so the lift is exact.
  Matrix a = Matrix::zeros(7, 7);
  a(0, 0) = lam;
  a(0, 5) = 1.0;
  a(1, 1) = mu;
  a(1, 2) = c;
  a(2, 2) = lam * lam;
  a(2, 3) = 2.0 * lam;
  a(2, 4) = 1.0;
  a(3, 3) = lam;
  a(3, 4) = 1.0;
  a(4, 4) = 1.0;
  a(5, 5) = 1.0;
  a(6, 6) = 1.0;
  sys.lift_matrix = std::move(a);
  sys.exact = true;
  return sys;
}

Dataset generate_fixed_point_dataset(const IteratedMap& map,
                                     const std::vector<Vec>& xs, double tol,
                                     std::size_t max_iter) {
  Dataset d;
  d.input_dim = map.input_dim;
  d.target_dim = map.state_dim;
  for (const Vec& x : xs) {
    FixedPointResult r = deq_forward(map, x, {}, tol, max_iter);
    if (r.converged) {
      d.inputs.push_back(x);
      d.targets.push_back(r.z_star);
    } else {
      ++d.dropped;
    }
  }
  if (!xs.empty() && d.inputs.empty())
    throw AllDivergedError("generate_fixed_point_dataset: no sample converged");
  return d;
}

void write_dataset_csv(const Dataset& d, std::ostream& out) {
  for (std::size_t j = 0; j < d.input_dim; ++j) {
    if (j) out << ',';
    out << 'x' << j;
  }
  for (std::size_t j = 0; j < d.target_dim; ++j) out << ",z" << j;
  out << '\n';
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    for (std::size_t j = 0; j < d.input_dim; ++j) {
      if (j) out << ',';
      out << format_double(d.inputs[i][j]);
    }
    for (std::size_t j = 0; j < d.target_dim; ++j)
      out << ',' << format_double(d.targets[i][j]);
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header))
    throw CsvError("dataset csv: missing header");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  Dataset d;
  std::size_t col = 0;
  std::size_t pos = 0;
  while (pos <= header.size()) {
    const std::size_t comma = header.find(',', pos);
    const std::string tok = header.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::string want_x = "x" + std::to_string(d.input_dim);
    const std::string want_z = "z" + std::to_string(d.target_dim);
    if (tok == want_x && d.target_dim == 0)
      ++d.input_dim;
    else if (tok == want_z)
      ++d.target_dim;
    else
      throw CsvError("dataset csv: unexpected header column '" + tok + "'");
    ++col;
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (d.input_dim == 0 || d.target_dim == 0)
    throw CsvError("dataset csv: header must list x then z columns");

  std::string rest{std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>()};
  if (rest.find_first_not_of(" \t\r\n") == std::string::npos) return d;
  std::istringstream body_in(rest);
  const Matrix body = parse_matrix_csv(body_in);
  if (body.rows > 0 && body.cols != d.input_dim + d.target_dim)
    throw CsvError("dataset csv: row width does not match header");
  for (std::size_t i = 0; i < body.rows; ++i) {
    Vec x(d.input_dim), z(d.target_dim);
    for (std::size_t j = 0; j < d.input_dim; ++j) x[j] = body(i, j);
    for (std::size_t j = 0; j < d.target_dim; ++j)
      z[j] = body(i, d.input_dim + j);
    d.inputs.push_back(std::move(x));
    d.targets.push_back(std::move(z));
  }
  return d;
}

}  // namespace sim
