#pragma once

#include <filesystem>

#include "capcrop/image.hpp"

namespace capcrop {

// PNG (8-bit) or binary PGM (P5) / PPM (P6), detected from the file header.
// Gray stays 1 channel, anything else becomes RGB; alpha is dropped.
Image load_image(const std::filesystem::path& path);

// Format from the extension: .png, .pgm (1 channel) or .ppm (3 channels).
// Intensities are clamped to [0,1] and rounded to 8 bits.
void save_image(const Image& img, const std::filesystem::path& path);

}  // namespace capcrop
