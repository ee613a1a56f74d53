#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace capcrop {

// Row-major, channel-interleaved raster. Loaders guarantee values in [0,1];
// the type itself only requires finite values.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(int y, int x, int c = 0) const {
    return data_[index(y, x, c)];
  }
  double& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Per-level blur rule: factor 1 gets base_sigma, coarser levels coarse_sigma / factor.
struct BlurPolicy {
  double base_sigma = 0.0;
  double coarse_sigma = 0.5;

  double sigma_for(double factor) const {
    return factor >= 1.0 ? base_sigma : coarse_sigma / factor;
  }
};

struct PyramidLevel {
  double factor = 1.0;
  Image image;
};

// Levels sorted by strictly increasing factor; the last one has factor 1.
class Pyramid {
 public:
  explicit Pyramid(std::vector<PyramidLevel> levels);

  const std::vector<PyramidLevel>& levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  const Image& original() const { return levels_.back().image; }

 private:
  std::vector<PyramidLevel> levels_;
};

// Output dimension round(factor * n); throws DegenerateSizeError below 2.
int scaled_dimension(int n, double factor);

Image resize(const Image& img, double factor);
Image gaussian_blur(const Image& img, double sigma);
Pyramid build_pyramid(const Image& img, std::span<const double> scales,
                      const BlurPolicy& policy = {});

// Normalized 1-D kernel of radius ceil(3 sigma); {1} for sigma == 0.
std::vector<double> gaussian_kernel(double sigma);

}  // namespace capcrop
