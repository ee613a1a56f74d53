#include "capcrop/testimages.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "capcrop/kernels.hpp"

namespace capcrop {

Image random_smooth_image(int height, int width, int channels, double sigma,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image noise(height, width, channels);
  for (double& v : noise.data()) {
    v = unit(rng);
  }
  Image img = gaussian_blur(noise, sigma);
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const double a = *lo;
  const double span = std::max(*hi - a, 1e-12);
  for (double& v : img.data()) {
    v = 0.05 + 0.9 * (v - a) / span;
  }
  return img;
}

Image render_blob_image(int size, int channels, const BlobSpec& spec) {
  Image texture;
  if (spec.texture > 0.0) {
    texture = random_smooth_image(size, size, 1, size / 16.0, spec.seed);
  }
  Image img(size, size, channels);
  const double inv2w2 = 1.0 / (2.0 * spec.width * spec.width);
  for (int i = 0; i < size; ++i) {
    const double ny = kernels::grid_coordinate(i, size) - spec.cy;
    for (int j = 0; j < size; ++j) {
      const double nx = kernels::grid_coordinate(j, size) - spec.cx;
      double v = spec.background +
                 spec.amplitude * std::exp(-(nx * nx + ny * ny) * inv2w2);
      if (spec.texture > 0.0) {
        v += spec.texture * (texture.at(i, j) - 0.5);
      }
      v = std::clamp(v, 0.0, 1.0);
      for (int c = 0; c < channels; ++c) {
        img.at(i, j, c) = v;
      }
    }
  }
  return img;
}

}  // namespace capcrop
