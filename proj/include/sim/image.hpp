#pragma once

#include <string>
#include <vector>

#include "sim/matrix.hpp"
#include "sim/models.hpp"

namespace sim {

/// RGB image with channels in [0,1], row-major pixels.
struct ImageGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // 3 * width * height, rgb interleaved

  double& at(std::size_t row, std::size_t col, std::size_t ch) {
    return pixels[3 * (row * width + col) + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return pixels[3 * (row * width + col) + ch];
  }
};

/// Binary PPM, magic P6, maxval 255; bytes scaled by 1/255 on load.
ImageGrid load_ppm(const std::string& path);
void save_ppm(const ImageGrid& grid, const std::string& path);

/// Parity lattice split: train (even row, even col), valid (even, odd),
/// test (odd, odd); the (odd, even) quarter is unused. Indices are
/// row * width + col.
struct PixelSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

PixelSplit split_pixels(const ImageGrid& grid);

/// Inputs are half-pixel-centered normalized coordinates
/// ((col+0.5)/W, (row+0.5)/H); targets the RGB triples.
void pixels_to_dataset(const ImageGrid& grid,
                       const std::vector<std::size_t>& indices, Matrix& inputs,
                       Matrix& targets);

/// Evaluate a D=2 -> 3 regression model over the full lattice, clamped to
/// [0,1].
ImageGrid render_model(const SimModel& model, std::size_t width,
                       std::size_t height);

}  // namespace sim
