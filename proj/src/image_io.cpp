#include "capcrop/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "capcrop/error.hpp"

namespace capcrop {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(name + ": " + png.message);
  }
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  // Read the alpha channel when present and drop it below; asking libpng for
  // an alpha-free format would composite onto black instead.
  const bool alpha = (png.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  png.format = gray ? (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY)
                    : (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB);
  const int ch = gray ? 1 : 3;
  const int stride = ch + (alpha ? 1 : 0);
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    throw FormatError(name + ": " + png.message);
  }
  const std::size_t pixels = static_cast<std::size_t>(png.width) * png.height;
  std::vector<double> data(pixels * ch);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < ch; ++c) {
      data[p * ch + c] = buf[p * stride + c] / 255.0;
    }
  }
  return Image(static_cast<int>(png.height), static_cast<int>(png.width), ch,
               std::move(data));
}

// Reads the next header integer, skipping whitespace and '#' comments.
long pnm_field(const std::vector<unsigned char>& b, std::size_t& pos,
               const std::string& name) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') {
        ++pos;
      }
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  long v = 0;
  const std::size_t start = pos;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > 1'000'000) {
      throw FormatError(name + ": PNM header value out of range");
    }
    ++pos;
  }
  if (pos == start) {
    throw FormatError(name + ": malformed PNM header");
  }
  return v;
}

Image decode_pnm(const std::vector<unsigned char>& b, const std::string& name) {
  const int ch = b[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const long w = pnm_field(b, pos, name);
  const long h = pnm_field(b, pos, name);
  const long maxval = pnm_field(b, pos, name);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw FormatError(name + ": unsupported PNM dimensions or maxval");
  }
  if (pos >= b.size() || !std::isspace(b[pos])) {
    throw FormatError(name + ": malformed PNM header");
  }
  ++pos;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h * ch;
  if (b.size() - pos < n * bps) {
    throw FormatError(name + ": truncated PNM raster");
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bps == 1 ? b[pos + i]
                                : (unsigned{b[pos + 2 * i]} << 8) | b[pos + 2 * i + 1];
    data[i] = std::min(1.0, static_cast<double>(v) / maxval);
  }
  return Image(static_cast<int>(h), static_cast<int>(w), ch, std::move(data));
}

std::vector<unsigned char> quantize(const Image& img) {
  std::vector<unsigned char> out(img.size());
  std::transform(img.data().begin(), img.data().end(), out.begin(), [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  });
  return out;
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::string name = path.string();
  static constexpr unsigned char kPngMagic[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic),
                                      bytes.begin())) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 3 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return decode_pnm(bytes, name);
  }
  throw FormatError(name + ": not a PNG, binary PGM or binary PPM file");
}

void save_image(const Image& img, const std::filesystem::path& path) {
  const auto pixels = quantize(img);
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width());
    png.height = static_cast<png_uint_32>(img.height());
    png.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
      throw IoError("cannot write " + path.string() + ": " + png.message);
    }
    return;
  }
  if (ext != ".pgm" && ext != ".ppm") {
    throw FormatError("unsupported output extension '" + ext + "'");
  }
  if ((ext == ".pgm") != (img.channels() == 1)) {
    throw FormatError(path.string() + ": channel count does not match extension");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << (img.channels() == 1 ? "P5" : "P6") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) {
    throw IoError("short write to " + path.string());
  }
}

}  // namespace capcrop
