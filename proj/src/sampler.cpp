#include "capcrop/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "capcrop/error.hpp"
#include "capcrop/kernels.hpp"

namespace capcrop {

namespace {

CropResult allocate(int out_size, int channels, Derivatives derivs) {
  if (out_size < 2) {
    throw DegenerateSizeError("crop output size " + std::to_string(out_size) +
                              " is below 2");
  }
  CropResult r{Image(out_size, out_size, channels), {}};
  const std::size_t n = r.image.size();
  if (derivs != Derivatives::none) {
    r.jacobian.dx.assign(n, 0.0);
    r.jacobian.dy.assign(n, 0.0);
  }
  if (derivs == Derivatives::full) {
    r.jacobian.ds.assign(n, 0.0);
  }
  return r;
}

kernels::SampleTarget target_of(CropResult& r) {
  return {r.image.data(), r.jacobian.dx, r.jacobian.dy, r.jacobian.ds};
}

}  // namespace

bool is_feasible(const CropParams& t) {
  return t.s > 0.0 && t.s <= 1.0 && std::abs(t.x) <= 1.0 - t.s &&
         std::abs(t.y) <= 1.0 - t.s;
}

CropResult bilinear_sample(const Image& img, const CropParams& theta,
                           int out_size, Derivatives derivs) {
  if (img.height() < 2 || img.width() < 2) {
    throw DegenerateSizeError("bilinear_sample: source smaller than 2x2");
  }
  CropResult r = allocate(out_size, img.channels(), derivs);
  const Image* src = &img;
  kernels::sample_crop({&src, 1}, theta.x, theta.y, theta.s, out_size, target_of(r));
  return r;
}

CropResult multiscale_crop(const Pyramid& pyr, const CropParams& theta,
                           int out_size, Derivatives derivs) {
  const auto& levels = pyr.levels();
  if (levels.size() == 1) {
    return bilinear_sample(levels.front().image, theta, out_size, derivs);
  }
  CropResult acc = allocate(out_size, levels.front().image.channels(), derivs);
  kernels::SampleTarget target = target_of(acc);
  target.weight = 1.0 / static_cast<double>(levels.size());
  std::vector<const Image*> sources;
  for (const auto& lvl : levels) {
    sources.push_back(&lvl.image);
  }
  kernels::sample_crop(sources, theta.x, theta.y, theta.s, out_size, target);
  return acc;
}

CropParams clip_params(const CropParams& theta) {
  if (!(theta.s > 0.0 && theta.s <= 1.0)) {
    throw std::invalid_argument("clip_params: scale must lie in (0, 1]");
  }
  const double bound = 1.0 - theta.s;
  return {std::clamp(theta.x, -bound, bound), std::clamp(theta.y, -bound, bound),
          theta.s};
}

PixelBox theta_to_pixel_box(const CropParams& theta, int img_w, int img_h) {
  const auto edge = [](double n, int extent) {
    const auto p = std::lround(n * extent / 2.0 + extent / 2.0);
    return static_cast<int>(std::clamp<long>(p, 0, extent));
  };
  return {edge(theta.x - theta.s, img_w), edge(theta.y - theta.s, img_h),
          edge(theta.x + theta.s, img_w), edge(theta.y + theta.s, img_h)};
}

double iou(const PixelBox& a, const PixelBox& b) {
  const int ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.area()) + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace capcrop
