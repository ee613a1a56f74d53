#include "capcrop/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "capcrop/objective.hpp"
#include "capcrop/synthetic.hpp"
#include "capcrop/testimages.hpp"

namespace capcrop {

double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom < 1e-8 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

namespace {

// Square side 12a makes the default pyramid levels exactly 3a, 4a, 6a, 12a.
// With s = out k / (Q a) (Q odd) and a center on the matching lattice, every
// sample coordinate on every level sits at an odd multiple of 1 / (2Q) pixels,
// so a central difference shifting it by less than that never straddles a
// bilinear cell boundary.
struct LatticeTheta {
  CropParams theta;
  bool ok = false;
};

LatticeTheta lattice_theta(int a, int out_size, double fd_step, std::mt19937_64& rng) {
  const int n = 12 * a;
  const double shift_px = fd_step * n / 2.0;
  std::vector<std::pair<int, int>> choices;  // (Q, k)
  for (int q = 25; q <= 61; q += 2) {
    if (0.5 / q <= 1.5 * shift_px) {
      continue;
    }
    for (int k = 1;; ++k) {
      const double s = static_cast<double>(out_size) * k / (q * a);
      if (s > 0.85) {
        break;
      }
      if (s >= 0.25) {
        choices.emplace_back(q, k);
      }
    }
  }
  if (choices.empty()) {
    return {};
  }
  const auto [q, k] =
      choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
  const double s = static_cast<double>(out_size) * k / (q * a);
  const double u0 = 1.0 / out_size - 1.0;  // first output grid coordinate
  // center = 2 w / (a Q) - 1 - s u0 for integer w; keep 0.1 clear of the box
  // edge so no sample is clamped.
  const double bound = 1.0 - s - 0.1;
  const auto pick = [&]() {
    const double scale = 2.0 / (a * q);
    const long lo = static_cast<long>(std::ceil((-bound + 1.0 + s * u0) / scale));
    const long hi = static_cast<long>(std::floor((bound + 1.0 + s * u0) / scale));
    const long w = std::uniform_int_distribution<long>(lo, hi)(rng);
    return w * scale - 1.0 - s * u0;
  };
  const double x = pick();
  const double y = pick();
  return {{x, y, s}, true};
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<int> side(6, 13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vocabulary& vocab = default_vocabulary();
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
  const std::vector<double> scales{0.25, 1.0 / 3.0, 0.5, 1.0};

  GradcheckReport report;
  for (int t = 0; t < opts.trials; ++t) {
    GradcheckCase c;
    LatticeTheta lt;
    int a = 0;
    while (!lt.ok) {
      a = side(rng);
      lt = lattice_theta(a, opts.out_size, opts.fd_step, rng);
    }
    c.height = c.width = 12 * a;
    c.channels = unit(rng) < 0.5 ? 1 : 3;
    c.theta = lt.theta;
    const auto image_seed = rng();
    const auto scorer_seed = rng();
    const Image img =
        random_smooth_image(c.height, c.width, c.channels, opts.blur_sigma, image_seed);
    const Pyramid pyr = build_pyramid(img, scales);

    std::string caption;
    for (int k = 0; k < 3; ++k) {
      caption += vocab.token(word(rng)) + ' ';
    }
    const CaptionBag user = bag_from_text(caption, vocab);
    auto scorer = make_builtin_scorer("builtin:seed=" + std::to_string(scorer_seed % 1000000),
                                      vocab.size());

    CropResult crop = multiscale_crop(pyr, c.theta, opts.out_size, Derivatives::full);
    if (opts.corrupt_jacobian) {
      for (double& v : crop.jacobian.dx) {
        v *= 1.1;
      }
      for (double& v : crop.jacobian.dy) {
        v *= 0.9;
      }
    }
    const LossReport r = total_loss(crop, user, *scorer, opts.lambda);
    c.analytic = {r.grad_theta[0], r.grad_theta[1]};

    for (int k = 0; k < 2; ++k) {
      CropParams hi = c.theta;
      CropParams lo = c.theta;
      (k == 0 ? hi.x : hi.y) += opts.fd_step;
      (k == 0 ? lo.x : lo.y) -= opts.fd_step;
      const double fp =
          loss_at(pyr, hi, user, *scorer, opts.lambda, opts.out_size, Derivatives::none).total;
      const double fm =
          loss_at(pyr, lo, user, *scorer, opts.lambda, opts.out_size, Derivatives::none).total;
      c.numeric[k] = (fp - fm) / (2.0 * opts.fd_step);
    }
    c.rel_error = relative_error(c.analytic, c.numeric);
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.cases.push_back(c);
  }
  return report;
}

}  // namespace capcrop
