// Scratch timing/quality probe for the image-regression configs (not part of
// the build).
#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "sim/image.hpp"
#include "sim/models.hpp"
#include "sim/training.hpp"
#include "../tests/support/testimage.hpp"

using namespace sim;

static double cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return (double)ru.ru_utime.tv_sec + 1e-6 * (double)ru.ru_utime.tv_usec +
         (double)ru.ru_stime.tv_sec + 1e-6 * (double)ru.ru_stime.tv_usec;
}

int main(int argc, char** argv) {
  const std::string variant = argc > 1 ? argv[1] : "rff";
  const std::size_t kprime = argc > 2 ? std::atoi(argv[2]) : 0;
  const std::size_t steps = argc > 3 ? std::atoi(argv[3]) : 20;

  const ImageGrid img = sim_test::make_natural_image(128, 128, 99);
  ModelConfig cfg;
  cfg.input_dim = 2;
  cfg.out_dim = 3;
  cfg.d = 16;
  cfg.nu_hidden = 256;
  cfg.bandwidth = 0.05;
  if (variant == "single") {
    cfg.variant = Variant::SingleTier;
    cfg.n = 256;
    cfg.mu_hidden = argc > 4 ? std::atoi(argv[4]) : 64;
    if (kprime) cfg.k = kprime;
  } else if (variant == "two") {
    cfg.variant = Variant::TwoTier;
    cfg.n = 32;
    cfg.mu_hidden = 64;
    cfg.m = 512;
    if (argc > 4) cfg.bandwidth = std::atof(argv[4]);
  } else {
    cfg.variant = Variant::RffOnly;
    cfg.m = 512;
  }
  if (kprime) cfg.k_prime = kprime;
  SimModel model = init_model(cfg, 1);

  const PixelSplit split = split_pixels(img);
  Matrix tx, ty, vx, vy, sx, sy;
  pixels_to_dataset(img, split.train, tx, ty);
  pixels_to_dataset(img, split.valid, vx, vy);
  pixels_to_dataset(img, split.test, sx, sy);

  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.iterations = steps;
  tc.seed = 1;
  const double c0 = cpu_seconds();
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult res = train(model, tx, ty, tc);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const double cpu = cpu_seconds() - c0;

  std::printf("%s kprime=%zu steps=%zu: wall %.1f s, cpu %.1f s (%.3f "
              "cpu-s/step); loss %.3e; train psnr %.2f valid %.2f test %.2f\n",
              variant.c_str(), kprime, steps, wall, cpu, cpu / (double)steps,
              res.final_loss, psnr(predict(model, tx), ty),
              psnr(predict(model, vx), vy), psnr(predict(model, sx), sy));
  return 0;
}
