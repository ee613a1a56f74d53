#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "capcrop/objective.hpp"

namespace capcrop {

struct LandscapeCell {
  double x = 0.0;
  double y = 0.0;
  LossReport report;
};

// Total loss over an n x n grid of feasible centers at one scale; cells are
// row-major (y outer, x inner).
struct Landscape {
  double scale = 1.0;
  int grid = 0;
  std::vector<LandscapeCell> cells;
};

// n evenly spaced centers spanning [-(1 - scale), 1 - scale].
std::vector<double> grid_positions(double scale, int n);

Landscape compute_landscape(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                            double lambda, int out_size, double scale, int grid);

struct GridOptimum {
  CropParams theta;
  double total = 0.0;
};

// Exhaustive search over grid x grid centers at every scale in `scales`; the
// first cell reaching the minimum wins.
GridOptimum grid_search(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                        double lambda, int out_size, std::span<const double> scales, int grid);

// printf("%.9g")
std::string format_sig9(double v);

inline constexpr const char* kLandscapeCsvHeader = "x,y,scale,caption,aesthetic,total";

void write_landscape_csv(const Landscape& land, std::ostream& out);

// Single-hue colormap normalized to the grid's [min, max]; cell_px pixels per cell.
Image landscape_heatmap(const Landscape& land, int cell_px);

}  // namespace capcrop
