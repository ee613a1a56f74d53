#pragma once

// Model-free caption distributions shared with external fixture-mode scorers.
// The formula is spelled out in docs/protocol.md; this is the C++ side of it.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "capcrop/objective.hpp"

namespace capcrop {

inline constexpr int kFixtureGrid = 4;
inline constexpr int kFixtureSteps = 3;

// Channel-averaged cell means over a 4x4 partition (cell of row i is
// i * 4 / n), each rounded to a byte. Cells are listed row-major.
std::array<unsigned char, kFixtureGrid * kFixtureGrid> fixture_grid_bytes(
    std::span<const float> pixels, int out_size, int channels);

// Step t: logit_w = byte w of SHA-256("capcrop-fixture:<seed>:<t>:<k>:" + grid)
// for k = 0, 1, ... concatenated, divided by 32; then a max-shifted softmax.
std::vector<Distribution> fixture_caption_steps(std::span<const float> pixels,
                                                int out_size, int channels,
                                                std::uint64_t seed,
                                                std::size_t vocab_size,
                                                int steps = kFixtureSteps);

}  // namespace capcrop
