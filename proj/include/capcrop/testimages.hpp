#pragma once

// Deterministic synthetic images for the gradient checker, benchmarks and the
// recovery fixtures.

#include <cstdint>

#include "capcrop/image.hpp"

namespace capcrop {

// Uniform noise blurred with `sigma` pixels and stretched to [0.05, 0.95].
Image random_smooth_image(int height, int width, int channels, double sigma,
                          std::uint64_t seed);

// Bright isotropic Gaussian on a dark background, optionally over smooth
// texture. Center and width are in normalized [-1,1] coordinates.
struct BlobSpec {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.2;
  double amplitude = 0.9;
  double background = 0.05;
  double texture = 0.0;  // amplitude of smooth background noise
  std::uint64_t seed = 0;
};

Image render_blob_image(int size, int channels, const BlobSpec& spec);

}  // namespace capcrop
