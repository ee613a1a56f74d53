#include <algorithm>
#include <cmath>
#include <vector>

#include "capcrop/kernels.hpp"

namespace capcrop::kernels {

namespace {

// Interpolation taps along one axis, shared by every row (or column).
struct Taps {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;
};

Taps resize_taps(int dst_n, int src_n) {
  Taps t;
  t.lo.resize(dst_n);
  t.hi.resize(dst_n);
  t.frac.resize(dst_n);
  const double ratio = static_cast<double>(src_n) / dst_n;
  for (int d = 0; d < dst_n; ++d) {
    const double s =
        std::clamp((d + 0.5) * ratio - 0.5, 0.0, static_cast<double>(src_n - 1));
    t.lo[d] = static_cast<int>(s);
    t.hi[d] = std::min(t.lo[d] + 1, src_n - 1);
    t.frac[d] = s - t.lo[d];
  }
  return t;
}

// Crop-grid taps: cell index, fraction and d(pixel)/d(normalized) per sample.
struct CropTaps {
  std::vector<int> cell;
  std::vector<double> frac;
  std::vector<double> slope;
  std::vector<double> grid;
};

CropTaps crop_taps(double center, double s, int out_size, int n) {
  CropTaps t;
  t.cell.resize(out_size);
  t.frac.resize(out_size);
  t.slope.resize(out_size);
  t.grid.resize(out_size);
  for (int k = 0; k < out_size; ++k) {
    const double g = grid_coordinate(k, out_size);
    double p = to_pixel(center + s * g, n);
    double slope = 0.5 * n;
    if (p < 0.0 || p > n - 1) {
      p = std::clamp(p, 0.0, static_cast<double>(n - 1));
      slope = 0.0;
    }
    t.cell[k] = std::min(static_cast<int>(std::floor(p)), n - 2);
    t.frac[k] = p - t.cell[k];
    t.slope[k] = slope;
    t.grid[k] = g;
  }
  return t;
}

}  // namespace

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  const Taps ty = resize_taps(out_h, src.height());
  const Taps tx = resize_taps(out_w, src.width());
  const int ch = src.channels();
  Image out(out_h, out_w, ch);
  const auto in = src.data();
  auto dst = out.data();
  const std::size_t src_row = static_cast<std::size_t>(src.width()) * ch;

#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) {
    const double* r0 = in.data() + ty.lo[y] * src_row;
    const double* r1 = in.data() + ty.hi[y] * src_row;
    const double wy = ty.frac[y];
    double* o = dst.data() + static_cast<std::size_t>(y) * out_w * ch;
    for (int x = 0; x < out_w; ++x) {
      const int a = tx.lo[x] * ch;
      const int b = tx.hi[x] * ch;
      const double wx = tx.frac[x];
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - wx) * r0[a + c] + wx * r0[b + c];
        const double bot = (1.0 - wx) * r1[a + c] + wx * r1[b + c];
        o[x * ch + c] = (1.0 - wy) * top + wy * bot;
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
  const std::size_t row = static_cast<std::size_t>(w) * ch;
  Image tmp(h, w, ch);
  Image out(h, w, ch);
  const double* in = src.data().data();
  double* mid = tmp.data().data();
  double* dst = out.data().data();

#pragma omp parallel
  {
    // Row padded by r clamped pixels on both sides, so the taps need no clamps.
    std::vector<double> padded((static_cast<std::size_t>(w) + 2 * r) * ch);
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      const double* s = in + y * row;
      for (int x = -r; x < w + r; ++x) {
        const double* px = s + std::clamp(x, 0, w - 1) * ch;
        std::copy(px, px + ch, padded.begin() + (x + r) * ch);
      }
      double* m = mid + y * row;
      std::fill(m, m + row, 0.0);
      for (int k = 0; k <= 2 * r; ++k) {
        const double kw = kernel[k];
        const double* p = padded.data() + k * ch;
        for (std::size_t e = 0; e < row; ++e) {
          m[e] += kw * p[e];
        }
      }
    }
#pragma omp for schedule(static)
    for (int y = 0; y < h; ++y) {
      double* o = dst + y * row;
      std::fill(o, o + row, 0.0);
      for (int k = -r; k <= r; ++k) {
        const double kw = kernel[k + r];
        const double* m = mid + std::clamp(y + k, 0, h - 1) * row;
        for (std::size_t e = 0; e < row; ++e) {
          o[e] += kw * m[e];
        }
      }
    }
  }
  return out;
}

namespace {

struct SourceTaps {
  const double* data;
  std::size_t row;
  CropTaps tx;
  CropTaps ty;
};

struct RowOut {
  double* val;
  double* jx;
  double* jy;
  double* js;
};

// Adds one source's contribution to output row i.
template <int CH, bool JAC, bool DS>
void sample_row(const SourceTaps& st, int i, int out_size, double wt, const RowOut& out) {
  const CropTaps& tx = st.tx;
  const double* r0 = st.data + st.ty.cell[i] * st.row;
  const double* r1 = r0 + st.row;
  const double fy = st.ty.frac[i];
  const double dpy = st.ty.slope[i];
  const double v = st.ty.grid[i];
  for (int j = 0; j < out_size; ++j) {
    const double* p0 = r0 + tx.cell[j] * CH;
    const double* p1 = r1 + tx.cell[j] * CH;
    const double fx = tx.frac[j];
    const int o = j * CH;
    for (int c = 0; c < CH; ++c) {
      const double i00 = p0[c];
      const double i01 = p0[CH + c];
      const double i10 = p1[c];
      const double i11 = p1[CH + c];
      const double top = i00 + fx * (i01 - i00);
      const double bot = i10 + fx * (i11 - i10);
      out.val[o + c] += wt * (top + fy * (bot - top));
      if constexpr (JAC) {
        const double gx = (1.0 - fy) * (i01 - i00) + fy * (i11 - i10);
        const double gy = bot - top;
        const double ex = gx * tx.slope[j];
        const double ey = gy * dpy;
        out.jx[o + c] += wt * ex;
        out.jy[o + c] += wt * ey;
        if constexpr (DS) {
          out.js[o + c] += wt * (ex * tx.grid[j] + ey * v);
        }
      }
    }
  }
}

template <int CH>
void sample_all(std::span<const SourceTaps> taps, int out_size, const SampleTarget& out) {
  const bool jac = !out.dx.empty();
  const bool ds = !out.ds.empty();
  // Row-major over the output so one output row stays cached while every
  // source adds into it.
#pragma omp parallel for schedule(static)
  for (int i = 0; i < out_size; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * out_size * CH;
    const RowOut row{out.values.data() + base, jac ? out.dx.data() + base : nullptr,
                     jac ? out.dy.data() + base : nullptr,
                     ds ? out.ds.data() + base : nullptr};
    for (const SourceTaps& st : taps) {
      if (ds) {
        sample_row<CH, true, true>(st, i, out_size, out.weight, row);
      } else if (jac) {
        sample_row<CH, true, false>(st, i, out_size, out.weight, row);
      } else {
        sample_row<CH, false, false>(st, i, out_size, out.weight, row);
      }
    }
  }
}

}  // namespace

void sample_crop(std::span<const Image* const> sources, double x, double y, double s,
                 int out_size, const SampleTarget& out) {
  if (sources.empty()) {
    return;
  }
  const int ch = sources.front()->channels();
  std::vector<SourceTaps> taps;
  taps.reserve(sources.size());
  for (const Image* src : sources) {
    taps.push_back({src->data().data(), static_cast<std::size_t>(src->width()) * ch,
                    crop_taps(x, s, out_size, src->width()),
                    crop_taps(y, s, out_size, src->height())});
  }
  if (ch == 1) {
    sample_all<1>(taps, out_size, out);
  } else {
    sample_all<3>(taps, out_size, out);
  }
}

}  // namespace capcrop::kernels
