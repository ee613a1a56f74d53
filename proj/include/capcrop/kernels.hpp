#pragma once

// Pixel kernels in two builds: `serial` is the straightforward reference used
// by tests, the unqualified versions are the OpenMP production path.

#include <span>

#include "capcrop/image.hpp"

namespace capcrop::kernels {

// Crop sample destination. `dx`, `dy`, `ds` are either empty or sized like the
// output (out_size * out_size * channels) and receive d(pixel)/d(theta); `ds`
// may only be filled when `dx` and `dy` are.
// Each source's sample is scaled by `weight` and added to the spans' contents,
// so a zeroed target with one source and weight 1 receives the plain sample.
struct SampleTarget {
  std::span<double> values;
  std::span<double> dx;
  std::span<double> dy;
  std::span<double> ds;
  double weight = 1.0;
};

namespace serial {

Image resize_bilinear(const Image& src, int out_h, int out_w);
Image blur_separable(const Image& src, std::span<const double> kernel);
void sample_crop(std::span<const Image* const> sources, double x, double y, double s,
                 int out_size, const SampleTarget& out);

}  // namespace serial

Image resize_bilinear(const Image& src, int out_h, int out_w);
Image blur_separable(const Image& src, std::span<const double> kernel);
void sample_crop(std::span<const Image* const> sources, double x, double y, double s,
                 int out_size, const SampleTarget& out);

// Normalized output-grid coordinate of index i in [0, n): pixel centers in (-1, 1).
inline double grid_coordinate(int i, int n) {
  return (2.0 * i + 1.0) / n - 1.0;
}

// Normalized coordinate -> continuous pixel coordinate for an extent of n pixels.
inline double to_pixel(double normalized, int n) {
  return ((normalized + 1.0) * n - 1.0) * 0.5;
}

}  // namespace capcrop::kernels
