#include <doctest.h>

#include "capcrop/error.hpp"
#include "capcrop/image.hpp"
#include "capcrop/image_io.hpp"
#include "capcrop/kernels.hpp"
#include "support.hpp"

using namespace capcrop;
using namespace testing;

namespace {

const std::filesystem::path kFixtures = CAPCROP_FIXTURES_DIR;

std::pair<double, double> value_range(const Image& img) {
  const auto d = img.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  return {*lo, *hi};
}

}  // namespace

TEST_SUITE("image") {
  TEST_CASE("constructor rejects mismatched data and channel counts") {
    CHECK_THROWS_AS(Image(2, 2, 1, std::vector<double>(3)), std::invalid_argument);
    CHECK_THROWS_AS(Image(2, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(Image(-1, 2, 1), std::invalid_argument);
    const Image img(3, 4, 3);
    CHECK(img.size() == 36);
    CHECK(img.index(1, 2, 1) == (1 * 4 + 2) * 3 + 1);
  }
}

TEST_SUITE("image_io") {
  TEST_CASE("2x2 pgm scales bytes to [0,1]") {
    const Image img = load_image(kFixtures / "ramp2x2.pgm");
    REQUIRE(img.height() == 2);
    REQUIRE(img.width() == 2);
    REQUIRE(img.channels() == 1);
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(0, 1) == 1.0);
    CHECK(img.at(1, 0) == 128.0 / 255.0);
    CHECK(img.at(1, 1) == 64.0 / 255.0);
  }

  TEST_CASE("1x1 red png loads as rgb [1,0,0]") {
    const Image img = load_image(kFixtures / "red1x1.png");
    REQUIRE(img.channels() == 3);
    CHECK(img.at(0, 0, 0) == 1.0);
    CHECK(img.at(0, 0, 1) == 0.0);
    CHECK(img.at(0, 0, 2) == 0.0);
  }

  TEST_CASE("gray png with alpha keeps one channel and drops alpha") {
    const Image img = load_image(kFixtures / "gray_alpha2x1.png");
    REQUIRE(img.channels() == 1);
    CHECK(img.at(0, 0) == 10.0 / 255.0);
    CHECK(img.at(0, 1) == 200.0 / 255.0);
  }

  TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_image(kFixtures / "does-not-exist.png"), IoError);
  }

  TEST_CASE("unknown content is a format error") {
    const auto dir = scratch_dir("io-format");
    std::ofstream(dir / "junk.png") << "GIF89a not really";
    CHECK_THROWS_AS(load_image(dir / "junk.png"), FormatError);
    std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\n" << "abc";
    CHECK_THROWS_AS(load_image(dir / "short.pgm"), FormatError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("save then load round-trips 8-bit values in every format") {
    const auto dir = scratch_dir("io-roundtrip");
    Image rgb(3, 5, 3);
    Image gray(4, 2, 1);
    for (std::size_t i = 0; i < rgb.size(); ++i) {
      rgb.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
    }
    for (std::size_t i = 0; i < gray.size(); ++i) {
      gray.data()[i] = static_cast<double>((i * 53) % 256) / 255.0;
    }
    save_image(rgb, dir / "a.png");
    save_image(rgb, dir / "a.ppm");
    save_image(gray, dir / "b.png");
    save_image(gray, dir / "b.pgm");
    CHECK(load_image(dir / "a.png") == rgb);
    CHECK(load_image(dir / "a.ppm") == rgb);
    CHECK(load_image(dir / "b.png") == gray);
    CHECK(load_image(dir / "b.pgm") == gray);
    CHECK_THROWS_AS(save_image(rgb, dir / "a.pgm"), FormatError);
    CHECK_THROWS_AS(save_image(rgb, dir / "a.jpg"), FormatError);
    std::filesystem::remove_all(dir);
  }
}

TEST_SUITE("resize") {
  TEST_CASE("factor 1 is the identity") {
    const Image img = random_image(7, 9, 3, 1);
    CHECK(resize(img, 1.0) == img);
  }

  TEST_CASE("constant image stays constant at any factor") {
    const Image img = filled(40, 30, 3, 0.37);
    for (double f : {0.25, 1.0 / 3.0, 0.5, 0.77}) {
      const Image r = resize(img, f);
      CHECK(r.height() == scaled_dimension(40, f));
      CHECK(r.width() == scaled_dimension(30, f));
      for (double v : r.data()) {
        CHECK(v == doctest::Approx(0.37).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("4x4 ramp at factor 0.5 matches the per-pixel bilinear oracle") {
    Image ramp(4, 4, 1);
    for (int i = 0; i < 16; ++i) {
      ramp.data()[i] = i;
    }
    const Image got = resize(ramp, 0.5);
    const Image want = resize_oracle(ramp, 2, 2);
    REQUIRE(got.height() == 2);
    REQUIRE(got.width() == 2);
    // Target pixel (0,0) sits at source (0.5, 0.5): mean of 0, 1, 4, 5.
    CHECK(want.at(0, 0) == 2.5);
    CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
  }

  TEST_CASE("non-integer factors match the oracle on random images") {
    const Image img = random_image(37, 53, 3, 2);
    for (double f : {0.2, 0.45, 0.9}) {
      const Image got = resize(img, f);
      const Image want = resize_oracle(img, got.height(), got.width());
      CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
    }
  }

  TEST_CASE("degenerate sizes and bad factors are rejected") {
    const Image img = filled(5, 5, 1, 0.5);
    CHECK_THROWS_AS(resize(img, 0.1), DegenerateSizeError);
    CHECK_THROWS_AS(resize(img, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(resize(img, 1.5), std::invalid_argument);
  }

  TEST_CASE("output stays within the input range") {
    const Image img = random_image(64, 48, 1, 3);
    const auto [lo, hi] = value_range(img);
    const auto [rlo, rhi] = value_range(resize(img, 0.31));
    CHECK(rlo >= lo);
    CHECK(rhi <= hi);
  }
}

TEST_SUITE("blur") {
  TEST_CASE("kernel radius is ceil(3 sigma) and sums to 1") {
    CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
    CHECK(gaussian_kernel(1.0).size() == 7);
    CHECK(gaussian_kernel(1.2).size() == 2 * 4 + 1);
    double sum = 0.0;
    for (double v : gaussian_kernel(2.5)) {
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(gaussian_kernel(-1.0), std::invalid_argument);
  }

  TEST_CASE("sigma 0 returns the input unchanged") {
    const Image img = random_image(6, 8, 3, 4);
    CHECK(gaussian_blur(img, 0.0) == img);
  }

  TEST_CASE("constant image is unchanged for any sigma") {
    const Image img = filled(20, 17, 3, 0.6);
    for (double sigma : {0.5, 1.0, 3.0}) {
      const Image b = gaussian_blur(img, sigma);
      for (double v : b.data()) {
        CHECK(v == doctest::Approx(0.6).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("delta image: center weight equals the dense kernel peak") {
    Image delta = filled(15, 15, 1, 0.0);
    delta.at(7, 7) = 1.0;
    const Image got = gaussian_blur(delta, 1.0);
    const Image want = dense_blur_oracle(delta, 1.0);
    CHECK(got.at(7, 7) == doctest::Approx(want.at(7, 7)).epsilon(1e-12));
    CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
    // The peak is the largest normalized 2-D weight.
    const auto [lo, hi] = value_range(got);
    CHECK(hi == got.at(7, 7));
    CHECK(lo >= 0.0);
  }

  TEST_CASE("random image matches dense convolution including the clamped edges") {
    const Image img = random_image(13, 19, 3, 5);
    const Image got = gaussian_blur(img, 1.7);
    const Image want = dense_blur_oracle(img, 1.7);
    CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
  }

  TEST_CASE("output stays within the input range") {
    const Image img = random_image(30, 30, 1, 6);
    const auto [lo, hi] = value_range(img);
    const auto [blo, bhi] = value_range(gaussian_blur(img, 2.0));
    CHECK(blo >= lo);
    CHECK(bhi <= hi);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("openmp resize and blur agree with the serial reference") {
    const Image img = random_image(71, 64, 3, 7);
    const Image a = kernels::resize_bilinear(img, 23, 40);
    const Image b = kernels::serial::resize_bilinear(img, 23, 40);
    CHECK(max_abs_diff(a.data(), b.data()) < 1e-12);
    for (double sigma : {0.5, 1.0, 4.0}) {
      const auto k = gaussian_kernel(sigma);
      const Image c = kernels::blur_separable(img, k);
      const Image d = kernels::serial::blur_separable(img, k);
      CHECK(max_abs_diff(c.data(), d.data()) < 1e-12);
    }
  }

  TEST_CASE("blur kernel wider than the image still clamps correctly") {
    const Image img = random_image(3, 4, 1, 8);
    const auto k = gaussian_kernel(3.0);
    const Image a = kernels::blur_separable(img, k);
    CHECK(max_abs_diff(a.data(), dense_blur_oracle(img, 3.0).data()) < 1e-12);
  }
}

TEST_SUITE("pyramid") {
  TEST_CASE("scales {1} with zero blur is the identity") {
    const Image img = random_image(9, 9, 3, 9);
    const std::vector<double> scales{1.0};
    const Pyramid p = build_pyramid(img, scales, BlurPolicy{0.0, 0.0});
    REQUIRE(p.size() == 1);
    CHECK(p.original() == img);
  }

  TEST_CASE("default scale set on 256x256 gives 64, 85, 128, 256") {
    const Image img = filled(256, 256, 1, 0.5);
    const std::vector<double> scales{1.0, 0.5, 0.25, 1.0 / 3.0};
    const Pyramid p = build_pyramid(img, scales);
    REQUIRE(p.size() == 4);
    const int want[] = {64, 85, 128, 256};
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(p.levels()[i].image.height() == want[i]);
      CHECK(p.levels()[i].image.width() == want[i]);
    }
    for (std::size_t i = 1; i < 4; ++i) {
      CHECK(p.levels()[i - 1].factor < p.levels()[i].factor);
    }
    CHECK(p.levels().back().factor == 1.0);
  }

  TEST_CASE("constant image gives constant levels") {
    const Image img = filled(90, 60, 3, 0.25);
    const std::vector<double> scales{0.25, 1.0 / 3.0, 0.5, 1.0};
    const Pyramid p = build_pyramid(img, scales, BlurPolicy{1.0, 0.5});
    for (const auto& lvl : p.levels()) {
      for (double v : lvl.image.data()) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("each level is resize then blur with the policy sigma") {
    const Image img = random_image(48, 40, 1, 10);
    const std::vector<double> scales{0.5, 1.0};
    const BlurPolicy policy{0.7, 0.5};
    const Pyramid p = build_pyramid(img, scales, policy);
    CHECK(policy.sigma_for(0.5) == 1.0);
    CHECK(policy.sigma_for(1.0) == 0.7);
    CHECK(p.levels()[0].image == gaussian_blur(resize(img, 0.5), 1.0));
    CHECK(p.levels()[1].image == gaussian_blur(img, 0.7));
  }

  TEST_CASE("invalid scale sets are rejected") {
    const Image img = filled(8, 8, 1, 0.5);
    CHECK_THROWS_AS(build_pyramid(img, std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(build_pyramid(img, std::vector<double>{0.5}), std::invalid_argument);
    CHECK_THROWS_AS(build_pyramid(img, std::vector<double>{0.1, 1.0}), DegenerateSizeError);
  }
}
