#include "capcrop/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "capcrop/error.hpp"
#include "capcrop/kernels.hpp"

namespace capcrop {

Image::Image(int height, int width, int channels)
    : Image(height, width, channels,
            std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                std::max(width, 0) * std::max(channels, 0))) {}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0) {
    throw std::invalid_argument("Image: negative dimension");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("Image: channels must be 1 or 3, got " +
                                std::to_string(channels));
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw std::invalid_argument("Image: data length does not match dimensions");
  }
}

Pyramid::Pyramid(std::vector<PyramidLevel> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) {
    throw std::invalid_argument("Pyramid: no levels");
  }
  std::sort(levels_.begin(), levels_.end(),
            [](const PyramidLevel& a, const PyramidLevel& b) {
              return a.factor < b.factor;
            });
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (!(levels_[i - 1].factor < levels_[i].factor)) {
      throw std::invalid_argument("Pyramid: duplicate scale factor");
    }
  }
  if (levels_.back().factor != 1.0) {
    throw std::invalid_argument("Pyramid: the original (factor 1) level is missing");
  }
  for (const auto& lvl : levels_) {
    if (lvl.image.height() < 2 || lvl.image.width() < 2) {
      throw DegenerateSizeError("Pyramid: level smaller than 2x2");
    }
  }
}

int scaled_dimension(int n, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw std::invalid_argument("resize factor must lie in (0, 1]");
  }
  const auto out = static_cast<int>(std::lround(factor * n));
  if (out < 2) {
    throw DegenerateSizeError("resize to " + std::to_string(out) +
                              " pixels (factor " + std::to_string(factor) +
                              " of " + std::to_string(n) + ")");
  }
  return out;
}

Image resize(const Image& img, double factor) {
  const int h = scaled_dimension(img.height(), factor);
  const int w = scaled_dimension(img.width(), factor);
  if (h == img.height() && w == img.width()) {
    return img;
  }
  return kernels::resize_bilinear(img, h, w);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (sigma < 0.0 || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian sigma must be finite and >= 0");
  }
  if (sigma == 0.0) {
    return {1.0};
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) {
    v /= sum;
  }
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  if (k.size() == 1) {
    return img;
  }
  return kernels::blur_separable(img, k);
}

Pyramid build_pyramid(const Image& img, std::span<const double> scales,
                      const BlurPolicy& policy) {
  if (scales.empty()) {
    throw std::invalid_argument("build_pyramid: empty scale set");
  }
  if (std::find(scales.begin(), scales.end(), 1.0) == scales.end()) {
    throw std::invalid_argument("build_pyramid: scale set must contain 1");
  }
  std::vector<double> sorted(scales.begin(), scales.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<PyramidLevel> levels;
  levels.reserve(sorted.size());
  for (double f : sorted) {
    levels.push_back({f, gaussian_blur(resize(img, f), policy.sigma_for(f))});
  }
  return Pyramid(std::move(levels));
}

}  // namespace capcrop
