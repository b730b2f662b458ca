#include "sim/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "sim/errors.hpp"

namespace sim {

namespace {

// PNM header token: skips whitespace and '#' comment lines
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back((char)c);
    c = in.get();
  }
  return tok;
}

}  // namespace

ImageGrid load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadImageError("load_ppm: cannot open " + path);
  const std::string magic = next_token(in);
  if (magic != "P6")
    throw BadImageError("load_ppm: bad magic '" + magic + "' (want P6)");
  const std::string ws = next_token(in);
  const std::string hs = next_token(in);
  const std::string ms = next_token(in);
  std::size_t w = 0, h = 0;
  unsigned long maxval = 0;
  try {
    w = std::stoul(ws);
    h = std::stoul(hs);
    maxval = std::stoul(ms);
  } catch (const std::exception&) {
    throw BadImageError("load_ppm: malformed header");
  }
  if (maxval != 255)
    throw BadImageError("load_ppm: bad maxval " + ms + " (want 255)");
  if (w == 0 || h == 0) throw BadImageError("load_ppm: empty image");
  // next_token consumed the single whitespace byte after maxval already

  ImageGrid g;
  g.width = w;
  g.height = h;
  std::vector<unsigned char> raw(3 * w * h);
  in.read((char*)raw.data(), (std::streamsize)raw.size());
  if ((std::size_t)in.gcount() != raw.size())
    throw BadImageError("load_ppm: truncated pixel data");
  g.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    g.pixels[i] = (double)raw[i] / 255.0;
  return g;
}

void save_ppm(const ImageGrid& grid, const std::string& path) {
  if (grid.width == 0 || grid.height == 0 ||
      grid.pixels.size() != 3 * grid.width * grid.height)
    throw BadImageError("save_ppm: invalid grid");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BadImageError("save_ppm: cannot open " + path);
  out << "P6\n" << grid.width << ' ' << grid.height << "\n255\n";
  std::vector<unsigned char> raw(grid.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(grid.pixels[i], 0.0, 1.0);
    raw[i] = (unsigned char)std::lround(v * 255.0);
  }
  out.write((const char*)raw.data(), (std::streamsize)raw.size());
  if (!out) throw BadImageError("save_ppm: write failed");
}

PixelSplit split_pixels(const ImageGrid& grid) {
  if (grid.width < 2 || grid.height < 2)
    throw DimensionError("split_pixels: image must be at least 2x2");
  PixelSplit s;
  for (std::size_t r = 0; r < grid.height; ++r)
    for (std::size_t c = 0; c < grid.width; ++c) {
      const std::size_t idx = r * grid.width + c;
      if (r % 2 == 0 && c % 2 == 0)
        s.train.push_back(idx);
      else if (r % 2 == 0)
        s.valid.push_back(idx);
      else if (c % 2 == 1)
        s.test.push_back(idx);
      // odd row, even col: unused quarter
    }
  return s;
}

void pixels_to_dataset(const ImageGrid& grid,
                       const std::vector<std::size_t>& indices, Matrix& inputs,
                       Matrix& targets) {
  inputs = Matrix(indices.size(), 2);
  targets = Matrix(indices.size(), 3);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t r = indices[i] / grid.width;
    const std::size_t c = indices[i] % grid.width;
    inputs(i, 0) = ((double)c + 0.5) / (double)grid.width;
    inputs(i, 1) = ((double)r + 0.5) / (double)grid.height;
    for (std::size_t ch = 0; ch < 3; ++ch)
      targets(i, ch) = grid.at(r, c, ch);
  }
}

ImageGrid render_model(const SimModel& model, std::size_t width,
                       std::size_t height) {
  if (model.cfg.input_dim != 2 || model.cfg.out_dim != 3 ||
      model.cfg.task != Task::Regression)
    throw VariantError("render_model: need a 2-in, 3-out regression model");
  Matrix coords(width * height, 2);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      coords(r * width + c, 0) = ((double)c + 0.5) / (double)width;
      coords(r * width + c, 1) = ((double)r + 0.5) / (double)height;
    }
  const Matrix out = predict(model, coords);
  ImageGrid g;
  g.width = width;
  g.height = height;
  g.pixels.resize(3 * width * height);
  for (std::size_t i = 0; i < width * height; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch)
      g.pixels[3 * i + ch] = std::clamp(out(i, ch), 0.0, 1.0);
  return g;
}

}  // namespace sim
