// Reference implementations: one output sample at a time, straight from the
// interpolation / convolution formulas. Kept for tests and benchmarks.

#include <algorithm>
#include <cmath>

#include "capcrop/kernels.hpp"

namespace capcrop::kernels::serial {

namespace {

double source_coordinate(int dst, int dst_n, int src_n) {
  const double s = (dst + 0.5) * static_cast<double>(src_n) / dst_n - 0.5;
  return std::clamp(s, 0.0, static_cast<double>(src_n - 1));
}

}  // namespace

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  Image out(out_h, out_w, src.channels());
  for (int y = 0; y < out_h; ++y) {
    const double sy = source_coordinate(y, out_h, src.height());
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = source_coordinate(x, out_w, src.width());
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = sx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        out.at(y, x, c) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

Image blur_separable(const Image& src, std::span<const double> kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  Image tmp(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          acc += kernel[k + r] * src.at(y, std::clamp(x + k, 0, w - 1), c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          acc += kernel[k + r] * tmp.at(std::clamp(y + k, 0, h - 1), x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

namespace {

void sample_one(const Image& src, double x, double y, double s, int out_size,
                const SampleTarget& out) {
  const int h = src.height();
  const int w = src.width();
  const int ch = src.channels();
  const bool jac = !out.dx.empty();
  for (int i = 0; i < out_size; ++i) {
    const double v = grid_coordinate(i, out_size);
    double py = to_pixel(y + s * v, h);
    double dpy = 0.5 * h;
    if (py < 0.0 || py > h - 1) {
      py = std::clamp(py, 0.0, static_cast<double>(h - 1));
      dpy = 0.0;
    }
    const int y0 = std::min(static_cast<int>(std::floor(py)), h - 2);
    const double fy = py - y0;
    for (int j = 0; j < out_size; ++j) {
      const double u = grid_coordinate(j, out_size);
      double px = to_pixel(x + s * u, w);
      double dpx = 0.5 * w;
      if (px < 0.0 || px > w - 1) {
        px = std::clamp(px, 0.0, static_cast<double>(w - 1));
        dpx = 0.0;
      }
      const int x0 = std::min(static_cast<int>(std::floor(px)), w - 2);
      const double fx = px - x0;
      for (int c = 0; c < ch; ++c) {
        const double i00 = src.at(y0, x0, c);
        const double i01 = src.at(y0, x0 + 1, c);
        const double i10 = src.at(y0 + 1, x0, c);
        const double i11 = src.at(y0 + 1, x0 + 1, c);
        const std::size_t o = (static_cast<std::size_t>(i) * out_size + j) * ch + c;
        out.values[o] += out.weight * ((1.0 - fy) * ((1.0 - fx) * i00 + fx * i01) +
                                       fy * ((1.0 - fx) * i10 + fx * i11));
        if (jac) {
          const double gx = (1.0 - fy) * (i01 - i00) + fy * (i11 - i10);
          const double gy = (1.0 - fx) * (i10 - i00) + fx * (i11 - i01);
          out.dx[o] += out.weight * (gx * dpx);
          out.dy[o] += out.weight * (gy * dpy);
          if (!out.ds.empty()) {
            out.ds[o] += out.weight * (gx * dpx * u + gy * dpy * v);
          }
        }
      }
    }
  }
}

}  // namespace

void sample_crop(std::span<const Image* const> sources, double x, double y, double s,
                 int out_size, const SampleTarget& out) {
  for (const Image* src : sources) {
    sample_one(*src, x, y, s, out_size, out);
  }
}

}  // namespace capcrop::kernels::serial
