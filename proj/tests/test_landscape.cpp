#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "capcrop/gradcheck.hpp"
#include "capcrop/landscape.hpp"
#include "capcrop/synthetic.hpp"
#include "capcrop/testimages.hpp"

using namespace capcrop;

namespace {

const Vocabulary& small_vocab() {
  static const Vocabulary v({"cat", "dog", "sun"});
  return v;
}

Pyramid blob_pyramid(double cx, double cy) {
  BlobSpec spec;
  spec.cx = cx;
  spec.cy = cy;
  spec.width = 0.15;
  const std::vector<double> scales{0.5, 1.0};
  return build_pyramid(render_blob_image(64, 1, spec), scales);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_SUITE("landscape") {
  TEST_CASE("grid positions span the feasible box evenly") {
    const auto p = grid_positions(0.5, 5);
    const std::vector<double> want{-0.5, -0.25, 0.0, 0.25, 0.5};
    REQUIRE(p.size() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(p[i] == doctest::Approx(want[i]).epsilon(1e-15));
    }
    const auto full = grid_positions(1.0, 3);
    CHECK(full == std::vector<double>{0.0, 0.0, 0.0});
    CHECK_THROWS_AS(grid_positions(0.5, 2), std::invalid_argument);
  }

  TEST_CASE("cells are bit-identical to loss_at") {
    const Pyramid pyr = blob_pyramid(0.2, -0.3);
    const CaptionBag user = bag_from_text("cat dog", small_vocab());
    auto scorer = make_builtin_scorer("builtin", small_vocab().size());
    const Landscape land = compute_landscape(pyr, user, *scorer, 0.3, 16, 0.6, 7);
    REQUIRE(land.cells.size() == 49);
    const auto pos = grid_positions(0.6, 7);
    for (int gy = 0; gy < 7; ++gy) {
      for (int gx = 0; gx < 7; ++gx) {
        const auto& c = land.cells[gy * 7 + gx];
        CHECK(c.x == pos[gx]);
        CHECK(c.y == pos[gy]);
        const LossReport r =
            loss_at(pyr, {c.x, c.y, 0.6}, user, *scorer, 0.3, 16, Derivatives::none);
        CHECK(c.report.total == r.total);
        CHECK(c.report.caption_term == r.caption_term);
        CHECK(c.report.aesthetic_term == r.aesthetic_term);
      }
    }
  }

  TEST_CASE("csv header, row count and number format") {
    const Pyramid pyr = blob_pyramid(0.0, 0.0);
    const CaptionBag user = bag_from_text("sun", small_vocab());
    auto scorer = make_builtin_scorer("blob", small_vocab().size());
    const Landscape land = compute_landscape(pyr, user, *scorer, 0.01, 16, 0.5, 3);
    std::ostringstream out;
    write_landscape_csv(land, out);
    const auto rows = lines_of(out.str());
    REQUIRE(rows.size() == 10);
    CHECK(rows[0] == "x,y,scale,caption,aesthetic,total");
    CHECK(rows[1].rfind("-0.5,-0.5,0.5,", 0) == 0);
    CHECK(rows[5].rfind("0,0,0.5,", 0) == 0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::count(rows[i].begin(), rows[i].end(), ',') == 5);
    }
    CHECK(format_sig9(1.0 / 3.0) == "0.333333333");
    CHECK(format_sig9(-2.5e-12) == "-2.5e-12");
    CHECK(format_sig9(0.0) == "0");
  }

  TEST_CASE("constant scorer gives a flat landscape") {
    const Pyramid pyr = blob_pyramid(0.3, 0.3);
    const CaptionBag user = bag_from_text("cat", small_vocab());
    auto scorer = make_builtin_scorer("constant", small_vocab().size());
    const Landscape land = compute_landscape(pyr, user, *scorer, 0.5, 8, 0.4, 9);
    for (const auto& c : land.cells) {
      CHECK(c.report.total == land.cells[0].report.total);
    }
    const Image heat = landscape_heatmap(land, 2);
    CHECK(heat.height() == 18);
    CHECK(heat.width() == 18);
    CHECK(heat.at(17, 17, 0) == doctest::Approx(0.1));
  }

  TEST_CASE("blob bowl: argmin within one cell of the blob") {
    const double cx = 0.25;
    const double cy = -0.15;
    const Pyramid pyr = blob_pyramid(cx, cy);
    const CaptionBag user = bag_from_text("cat", small_vocab());
    auto scorer = make_builtin_scorer("blob", small_vocab().size());
    const Landscape land = compute_landscape(pyr, user, *scorer, 0.01, 16, 0.5, 21);
    const auto best = std::min_element(
        land.cells.begin(), land.cells.end(),
        [](const auto& a, const auto& b) { return a.report.total < b.report.total; });
    const double cell = 1.0 / 20.0;
    CHECK(std::abs(best->x - cx) <= cell);
    CHECK(std::abs(best->y - cy) <= cell);
  }

  TEST_CASE("heatmap shades the grid minimum darkest and the maximum brightest") {
    const Pyramid pyr = blob_pyramid(0.3, 0.0);
    const CaptionBag user = bag_from_text("cat", small_vocab());
    auto scorer = make_builtin_scorer("blob", small_vocab().size());
    const Landscape land = compute_landscape(pyr, user, *scorer, 0.01, 8, 0.5, 5);
    const Image heat = landscape_heatmap(land, 3);
    CHECK(heat.height() == 15);
    double lo = 1e9;
    double hi = -1e9;
    for (int y = 0; y < 15; ++y) {
      for (int x = 0; x < 15; ++x) {
        lo = std::min(lo, heat.at(y, x, 0));
        hi = std::max(hi, heat.at(y, x, 0));
      }
    }
    CHECK(lo == doctest::Approx(0.1));
    CHECK(hi == doctest::Approx(1.0));
    CHECK_THROWS_AS(landscape_heatmap(land, 0), std::invalid_argument);
  }

  TEST_CASE("landscape is deterministic") {
    const Pyramid pyr = blob_pyramid(-0.2, 0.1);
    const CaptionBag user = bag_from_text("dog sun", small_vocab());
    auto scorer = make_builtin_scorer("builtin", small_vocab().size());
    std::ostringstream a;
    std::ostringstream b;
    write_landscape_csv(compute_landscape(pyr, user, *scorer, 0.1, 16, 0.7, 5), a);
    write_landscape_csv(compute_landscape(pyr, user, *scorer, 0.1, 16, 0.7, 5), b);
    CHECK(a.str() == b.str());
  }

  TEST_CASE("invalid scale") {
    const Pyramid pyr = blob_pyramid(0.0, 0.0);
    const CaptionBag user = bag_from_text("cat", small_vocab());
    auto scorer = make_builtin_scorer("constant", small_vocab().size());
    CHECK_THROWS_AS(compute_landscape(pyr, user, *scorer, 0.0, 8, 0.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(compute_landscape(pyr, user, *scorer, 0.0, 8, 1.5, 3), std::invalid_argument);
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("relative error definition") {
    const std::vector<double> a{3.0, 4.0};
    const std::vector<double> b{3.0, 4.5};
    CHECK(relative_error(a, b) == doctest::Approx(0.5 / std::hypot(3.0, 4.5)));
    const std::vector<double> tiny{1e-10, 0.0};
    const std::vector<double> zero{0.0, 0.0};
    CHECK(relative_error(tiny, zero) == doctest::Approx(1e-10));
  }

  TEST_CASE("analytic gradients agree with central differences") {
    GradcheckOptions o;
    o.trials = 8;
    o.out_size = 48;
    const auto rep = run_gradcheck(o);
    REQUIRE(rep.cases.size() == 8);
    CHECK(rep.max_rel_error < 1e-3);
    bool saw_gray = false;
    bool saw_rgb = false;
    for (const auto& c : rep.cases) {
      CHECK(is_feasible(c.theta));
      CHECK(c.theta.s >= 0.25);
      saw_gray = saw_gray || c.channels == 1;
      saw_rgb = saw_rgb || c.channels == 3;
    }
    CHECK(saw_gray);
    CHECK(saw_rgb);
  }

  TEST_CASE("a corrupted jacobian is caught") {
    GradcheckOptions o;
    o.trials = 8;
    o.out_size = 48;
    o.corrupt_jacobian = true;
    CHECK(run_gradcheck(o).max_rel_error > 1e-2);
  }

  TEST_CASE("a fixed seed reproduces the report") {
    GradcheckOptions o;
    o.trials = 3;
    o.out_size = 32;
    o.seed = 77;
    const auto a = run_gradcheck(o);
    const auto b = run_gradcheck(o);
    REQUIRE(a.cases.size() == b.cases.size());
    for (std::size_t i = 0; i < a.cases.size(); ++i) {
      CHECK(a.cases[i].theta.x == b.cases[i].theta.x);
      CHECK(a.cases[i].theta.s == b.cases[i].theta.s);
      CHECK(a.cases[i].analytic == b.cases[i].analytic);
      CHECK(a.cases[i].numeric == b.cases[i].numeric);
    }
  }
}
