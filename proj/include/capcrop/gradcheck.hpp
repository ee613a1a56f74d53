#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capcrop/sampler.hpp"

namespace capcrop {

struct GradcheckOptions {
  int trials = 100;
  std::uint64_t seed = 1;
  int out_size = kDefaultOutSize;
  double fd_step = 1e-4;
  double lambda = 1.0;  // large enough that the aesthetic branch matters
  double blur_sigma = 3.0;
  // Negative control: scale the sampler jacobian before the chain rule.
  bool corrupt_jacobian = false;
};

struct GradcheckCase {
  int height = 0;
  int width = 0;
  int channels = 0;
  CropParams theta;
  std::array<double, 2> analytic{};
  std::array<double, 2> numeric{};
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
};

// ||a - b|| / max(||a||, ||b||); plain ||a - b|| when both norms are below 1e-8.
double relative_error(std::span<const double> a, std::span<const double> b);

// Analytic d total / d(x, y) (sampler jacobian + builtin scorer gradients)
// against central differences, on seeded random blurred images.
GradcheckReport run_gradcheck(const GradcheckOptions& opts);

}  // namespace capcrop
