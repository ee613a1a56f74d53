#include "capcrop/fixture_mode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <openssl/sha.h>

namespace capcrop {

std::array<unsigned char, kFixtureGrid * kFixtureGrid> fixture_grid_bytes(
    std::span<const float> pixels, int out_size, int channels) {
  const auto n = static_cast<std::size_t>(out_size);
  if (out_size < kFixtureGrid || channels < 1 ||
      pixels.size() != n * n * static_cast<std::size_t>(channels)) {
    throw std::invalid_argument("fixture grid: buffer does not match the crop size");
  }
  std::array<double, kFixtureGrid * kFixtureGrid> sum{};
  std::array<long, kFixtureGrid * kFixtureGrid> count{};
  for (int i = 0; i < out_size; ++i) {
    const int r = i * kFixtureGrid / out_size;
    for (int j = 0; j < out_size; ++j) {
      const int cell = r * kFixtureGrid + j * kFixtureGrid / out_size;
      for (int c = 0; c < channels; ++c) {
        sum[cell] += pixels[(static_cast<std::size_t>(i) * n + j) * channels + c];
      }
      count[cell] += channels;
    }
  }
  std::array<unsigned char, kFixtureGrid * kFixtureGrid> out{};
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double v = std::round(255.0 * sum[k] / static_cast<double>(count[k]));
    out[k] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

std::vector<Distribution> fixture_caption_steps(std::span<const float> pixels,
                                                int out_size, int channels,
                                                std::uint64_t seed,
                                                std::size_t vocab_size,
                                                int steps) {
  if (vocab_size == 0 || steps < 1) {
    throw std::invalid_argument("fixture steps: empty vocabulary or no steps");
  }
  const auto grid = fixture_grid_bytes(pixels, out_size, channels);
  std::vector<Distribution> out;
  out.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    std::vector<unsigned char> stream;
    for (std::size_t k = 0; stream.size() < vocab_size; ++k) {
      std::string msg = "capcrop-fixture:" + std::to_string(seed) + ":" +
                        std::to_string(t) + ":" + std::to_string(k) + ":";
      msg.append(grid.begin(), grid.end());
      unsigned char digest[SHA256_DIGEST_LENGTH];
      SHA256(reinterpret_cast<const unsigned char*>(msg.data()), msg.size(), digest);
      stream.insert(stream.end(), digest, digest + SHA256_DIGEST_LENGTH);
    }
    Distribution p(vocab_size);
    double top = 0.0;
    for (std::size_t w = 0; w < vocab_size; ++w) {
      p[w] = stream[w] / 32.0;
      top = std::max(top, p[w]);
    }
    double total = 0.0;
    for (auto& v : p) {
      v = std::exp(v - top);
      total += v;
    }
    for (auto& v : p) {
      v /= total;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace capcrop
