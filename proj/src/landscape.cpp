#include "capcrop/landscape.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace capcrop {

std::vector<double> grid_positions(double scale, int n) {
  if (n < 3) {
    throw std::invalid_argument("landscape grid must be at least 3x3");
  }
  const double bound = 1.0 - scale;
  std::vector<double> pos(n);
  for (int a = 0; a < n; ++a) {
    pos[a] = -bound + 2.0 * bound * a / (n - 1);
  }
  return pos;
}

Landscape compute_landscape(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                            double lambda, int out_size, double scale, int grid) {
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw std::invalid_argument("landscape scale must lie in (0, 1]");
  }
  const auto pos = grid_positions(scale, grid);
  Landscape land{scale, grid, std::vector<LandscapeCell>(static_cast<std::size_t>(grid) * grid)};
  std::vector<std::exception_ptr> errors(land.cells.size());
  const int total = static_cast<int>(land.cells.size());

#pragma omp parallel for schedule(dynamic) if (scorer.concurrent_safe())
  for (int k = 0; k < total; ++k) {
    auto& cell = land.cells[k];
    cell.x = pos[k % grid];
    cell.y = pos[k / grid];
    try {
      cell.report = loss_at(pyr, {cell.x, cell.y, scale}, user, scorer, lambda, out_size,
                            Derivatives::none);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
  return land;
}

GridOptimum grid_search(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                        double lambda, int out_size, std::span<const double> scales, int grid) {
  if (scales.empty()) {
    throw std::invalid_argument("grid_search: no scales");
  }
  GridOptimum best;
  best.total = std::numeric_limits<double>::infinity();
  for (double s : scales) {
    const Landscape land = compute_landscape(pyr, user, scorer, lambda, out_size, s, grid);
    for (const auto& c : land.cells) {
      if (c.report.total < best.total) {
        best = {{c.x, c.y, s}, c.report.total};
      }
    }
  }
  return best;
}

std::string format_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_landscape_csv(const Landscape& land, std::ostream& out) {
  out << kLandscapeCsvHeader << '\n';
  for (const auto& c : land.cells) {
    out << format_sig9(c.x) << ',' << format_sig9(c.y) << ',' << format_sig9(land.scale) << ','
        << format_sig9(c.report.caption_term) << ',' << format_sig9(c.report.aesthetic_term)
        << ',' << format_sig9(c.report.total) << '\n';
  }
}

Image landscape_heatmap(const Landscape& land, int cell_px) {
  if (land.cells.empty() || cell_px < 1) {
    throw std::invalid_argument("landscape_heatmap: empty landscape");
  }
  const auto [lo, hi] = std::minmax_element(
      land.cells.begin(), land.cells.end(), [](const LandscapeCell& a, const LandscapeCell& b) {
        return a.report.total < b.report.total;
      });
  const double vmin = lo->report.total;
  const double span = hi->report.total - vmin;
  const int n = land.grid;
  Image img(n * cell_px, n * cell_px, 3);
  static constexpr double kHue[3] = {1.0, 0.55, 0.1};
  for (int gy = 0; gy < n; ++gy) {
    for (int gx = 0; gx < n; ++gx) {
      const double v = land.cells[static_cast<std::size_t>(gy) * n + gx].report.total;
      const double t = span > 0.0 ? (v - vmin) / span : 0.0;
      for (int py = 0; py < cell_px; ++py) {
        for (int px = 0; px < cell_px; ++px) {
          for (int c = 0; c < 3; ++c) {
            img.at(gy * cell_px + py, gx * cell_px + px, c) = (0.1 + 0.9 * t) * kHue[c];
          }
        }
      }
    }
  }
  return img;
}

}  // namespace capcrop
