#pragma once

#include <vector>

#include "capcrop/image.hpp"

namespace capcrop {

// Crop center (x, y) in normalized [-1,1] coordinates and scale s in (0,1].
// The crop spans [x - s, x + s] x [y - s, y + s] in normalized space.
struct CropParams {
  double x = 0.0;
  double y = 0.0;
  double s = 1.0;

  bool operator==(const CropParams&) const = default;
};

bool is_feasible(const CropParams& theta);

// Partial derivatives of every crop pixel, laid out like CropResult::image.
struct CropJacobian {
  std::vector<double> dx;
  std::vector<double> dy;
  std::vector<double> ds;
};

// Which partial derivatives a crop carries. The pipeline only needs the
// position pair; the scale derivative is for validation.
enum class Derivatives { none, position, full };

struct CropResult {
  Image image;
  CropJacobian jacobian;  // empty vectors for derivatives not requested

  bool has_jacobian() const { return !jacobian.dx.empty(); }
};

inline constexpr int kDefaultOutSize = 224;

CropResult bilinear_sample(const Image& img, const CropParams& theta,
                           int out_size, Derivatives derivs = Derivatives::full);

// Mean of per-level samples (same normalized theta on every level).
CropResult multiscale_crop(const Pyramid& pyr, const CropParams& theta,
                           int out_size, Derivatives derivs = Derivatives::full);

CropParams clip_params(const CropParams& theta);

// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool operator==(const PixelBox&) const = default;
};

PixelBox theta_to_pixel_box(const CropParams& theta, int img_w, int img_h);

double iou(const PixelBox& a, const PixelBox& b);

}  // namespace capcrop
