#include <chrono>
#include <cstdio>
#include <functional>

#include "sim/matrix.hpp"
#include "sim/models.hpp"
#include "sim/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void bench_matmul(std::size_t n) {
  sim::Rng rng(7);
  sim::Matrix a(n, n), b(n, n);
  for (double& v : a.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : b.data) v = rng.uniform(-1.0, 1.0);

  const double flops = 2.0 * (double)n * n * n;
  sim::Matrix ref, omp, blas;
  const double ts = time_best_of(3, [&] { ref = sim::matmul_serial(a, b); });
  const double to = time_best_of(3, [&] { omp = sim::matmul_omp(a, b); });
  const double tb = time_best_of(3, [&] { blas = sim::matmul(a, b); });

  const bool omp_matches = ref.data == omp.data;  // bitwise by construction
  const bool blas_matches = sim::approx_equal(ref, blas, 1e-9 * (double)n);
  std::printf(
      "matmul %4zu  serial %8.2f ms (%6.2f GF/s)  omp %8.2f ms (%6.2f GF/s)  "
      "blas %8.2f ms (%6.2f GF/s)  omp bitwise=%s blas close=%s\n",
      n, ts * 1e3, flops / ts * 1e-9, to * 1e3, flops / to * 1e-9, tb * 1e3,
      flops / tb * 1e-9, omp_matches ? "yes" : "NO",
      blas_matches ? "yes" : "NO");
}

void bench_forward() {
  sim::ModelConfig cfg;
  cfg.variant = sim::Variant::RffOnly;
  cfg.input_dim = 2;
  cfg.m = 512;
  cfg.d = 16;
  cfg.out_dim = 3;
  cfg.nu_hidden = 256;
  cfg.bandwidth = 0.05;
  const sim::SimModel model = sim::init_model(cfg, 0);

  sim::Rng rng(11);
  sim::Matrix x(4096, 2);
  for (double& v : x.data) v = rng.uniform();
  sim::Matrix out;
  const double t = time_best_of(3, [&] { out = sim::predict(model, x); });
  std::printf("rff-only forward, batch 4096: %8.2f ms\n", t * 1e3);
}

}  // namespace

int main() {
  for (std::size_t n : {128, 256, 512, 1024}) bench_matmul(n);
  bench_forward();
  return 0;
}
