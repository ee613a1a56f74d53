#pragma once

// Independent oracles and helpers shared by the test binaries. Oracles are
// written from the textbook formulas, not from the production kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "capcrop/image.hpp"
#include "capcrop/sampler.hpp"

namespace testing {

using capcrop::CropParams;
using capcrop::Image;

inline double lerp_oracle(double a, double b, double t) { return a + (b - a) * t; }

// Bilinear read at continuous pixel coordinates, clamped to the edge.
inline double bilinear_oracle(const Image& img, double px, double py, int c) {
  px = std::clamp(px, 0.0, img.width() - 1.0);
  py = std::clamp(py, 0.0, img.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(px));
  const int y0 = static_cast<int>(std::floor(py));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double tx = px - x0;
  const double ty = py - y0;
  return lerp_oracle(lerp_oracle(img.at(y0, x0, c), img.at(y0, x1, c), tx),
                     lerp_oracle(img.at(y1, x0, c), img.at(y1, x1, c), tx), ty);
}

inline double grid_coordinate_oracle(int i, int n) { return -1.0 + (2.0 * i + 1.0) / n; }

// Pixel centers: output pixel i of n covers normalized [-1 + 2i/n, -1 + 2(i+1)/n].
inline double pixel_of_normalized(double t, int n) { return (t + 1.0) * n / 2.0 - 0.5; }

inline double crop_pixel_oracle(const Image& img, const CropParams& th, int out,
                                int i, int j, int c) {
  const double u = grid_coordinate_oracle(j, out);
  const double v = grid_coordinate_oracle(i, out);
  return bilinear_oracle(img, pixel_of_normalized(th.x + th.s * u, img.width()),
                         pixel_of_normalized(th.y + th.s * v, img.height()), c);
}

inline Image crop_oracle(const Image& img, const CropParams& th, int out) {
  Image r(out, out, img.channels());
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) {
      for (int c = 0; c < img.channels(); ++c) {
        r.at(i, j, c) = crop_pixel_oracle(img, th, out, i, j, c);
      }
    }
  }
  return r;
}

inline Image resize_oracle(const Image& img, int oh, int ow) {
  Image r(oh, ow, img.channels());
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const double sy = (i + 0.5) * img.height() / oh - 0.5;
      const double sx = (j + 0.5) * img.width() / ow - 0.5;
      for (int c = 0; c < img.channels(); ++c) {
        r.at(i, j, c) = bilinear_oracle(img, sx, sy, c);
      }
    }
  }
  return r;
}

// Dense 2-D Gaussian weights over the full (2r+1)^2 window, normalized as a
// whole, with clamped edge reads.
inline Image dense_blur_oracle(const Image& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w;
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      w.push_back(v);
      total += v;
    }
  }
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        std::size_t k = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = std::clamp(y + dy, 0, img.height() - 1);
            const int xx = std::clamp(x + dx, 0, img.width() - 1);
            acc += w[k++] / total * img.at(yy, xx, c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

inline Image filled(int h, int w, int c, double v) {
  return Image(h, w, c, std::vector<double>(static_cast<std::size_t>(h) * w * c, v));
}

inline Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, c);
  for (auto& v : img.data()) {
    v = u(rng);
  }
  return img;
}

// a*x + b*y + c*channel + d in pixel units; bilinear reproduces it exactly
// away from the clamp, so finite differences have no kinks.
inline Image linear_image(int h, int w, int c, double a, double b) {
  Image img(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        img.at(y, x, k) = 0.1 + a * x + b * y + 0.01 * k;
      }
    }
  }
  return img;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("capcrop-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    out.push_back(line);
  }
  return out;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen((cmd + " 2>&1").c_str(), "r");
  if (pipe == nullptr) {
    return r;
  }
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
    r.output.append(buf, n);
  }
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace testing
