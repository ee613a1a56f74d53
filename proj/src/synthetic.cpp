#include "capcrop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "capcrop/error.hpp"
#include "capcrop/kernels.hpp"

namespace capcrop {

namespace {

std::vector<int> cell_extents(int n, int grid) {
  std::vector<int> counts(grid, 0);
  for (int i = 0; i < n; ++i) {
    ++counts[i * grid / n];
  }
  return counts;
}

double mean_intensity(const Image& crop) {
  double sum = 0.0;
  for (double v : crop.data()) {
    sum += v;
  }
  return sum / static_cast<double>(crop.size());
}

}  // namespace

// --- SoftCaptioner ---------------------------------------------------------

SoftCaptioner::SoftCaptioner(std::size_t vocab_size, std::uint64_t seed, int steps,
                             int grid, double weight_scale)
    : vocab_size_(vocab_size), steps_(steps), grid_(grid) {
  if (vocab_size == 0 || steps < 1 || grid < 1) {
    throw std::invalid_argument("SoftCaptioner: bad dimensions");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w_std = weight_scale / std::sqrt(static_cast<double>(feature_count()));
  weights_.resize(static_cast<std::size_t>(steps) * vocab_size * feature_count());
  for (double& w : weights_) {
    w = w_std * normal(rng);
  }
  bias_.resize(static_cast<std::size_t>(steps) * vocab_size);
  for (double& b : bias_) {
    b = normal(rng);
  }
}

std::size_t SoftCaptioner::feature_count() const {
  return static_cast<std::size_t>(grid_) * grid_ * kFeatureChannels;
}

std::vector<double> SoftCaptioner::features(const Image& crop) const {
  const int h = crop.height();
  const int w = crop.width();
  const auto rows = cell_extents(h, grid_);
  const auto cols = cell_extents(w, grid_);
  std::vector<double> f(feature_count(), 0.0);
  for (int i = 0; i < h; ++i) {
    const int ci = cell_of(i, h);
    for (int j = 0; j < w; ++j) {
      const std::size_t cell = static_cast<std::size_t>(ci) * grid_ + cell_of(j, w);
      for (int c = 0; c < kFeatureChannels; ++c) {
        f[cell * kFeatureChannels + c] +=
            crop.at(i, j, crop.channels() == 1 ? 0 : c);
      }
    }
  }
  for (int ci = 0; ci < grid_; ++ci) {
    for (int cj = 0; cj < grid_; ++cj) {
      const double inv = 1.0 / (static_cast<double>(rows[ci]) * cols[cj]);
      for (int c = 0; c < kFeatureChannels; ++c) {
        f[(static_cast<std::size_t>(ci) * grid_ + cj) * kFeatureChannels + c] *= inv;
      }
    }
  }
  return f;
}

std::vector<double> SoftCaptioner::step_probs(std::span<const double> feats,
                                              int t) const {
  const std::size_t nf = feature_count();
  std::vector<double> logits(vocab_size_);
  for (std::size_t v = 0; v < vocab_size_; ++v) {
    const double* wrow = &weights_[(t * vocab_size_ + v) * nf];
    double z = bias_[t * vocab_size_ + v];
    for (std::size_t k = 0; k < nf; ++k) {
      z += wrow[k] * feats[k];
    }
    logits[v] = z;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - mx);
    sum += z;
  }
  for (double& z : logits) {
    z /= sum;
  }
  return logits;
}

std::vector<Distribution> SoftCaptioner::steps(const Image& crop) const {
  const auto f = features(crop);
  std::vector<Distribution> out;
  out.reserve(steps_);
  for (int t = 0; t < steps_; ++t) {
    out.push_back(step_probs(f, t));
  }
  return out;
}

void SoftCaptioner::backward(const Image& crop, std::span<const double> d_mean,
                             std::span<double> grad) const {
  const std::size_t nf = feature_count();
  const auto f = features(crop);
  std::vector<double> d_feat(nf, 0.0);
  for (int t = 0; t < steps_; ++t) {
    const auto p = step_probs(f, t);
    double pg = 0.0;
    for (std::size_t v = 0; v < vocab_size_; ++v) {
      pg += p[v] * d_mean[v];
    }
    for (std::size_t v = 0; v < vocab_size_; ++v) {
      // softmax VJP, with the 1/T of the step average folded in
      const double dz = p[v] * (d_mean[v] - pg) / steps_;
      if (dz == 0.0) {
        continue;
      }
      const double* wrow = &weights_[(t * vocab_size_ + v) * nf];
      for (std::size_t k = 0; k < nf; ++k) {
        d_feat[k] += wrow[k] * dz;
      }
    }
  }

  const int h = crop.height();
  const int w = crop.width();
  const int ch = crop.channels();
  const auto rows = cell_extents(h, grid_);
  const auto cols = cell_extents(w, grid_);
  for (int i = 0; i < h; ++i) {
    const int ci = cell_of(i, h);
    for (int j = 0; j < w; ++j) {
      const int cj = cell_of(j, w);
      const std::size_t cell = static_cast<std::size_t>(ci) * grid_ + cj;
      const double inv = 1.0 / (static_cast<double>(rows[ci]) * cols[cj]);
      const double* df = &d_feat[cell * kFeatureChannels];
      const std::size_t o = crop.index(i, j);
      if (ch == 1) {
        grad[o] += (df[0] + df[1] + df[2]) * inv;
      } else {
        for (int c = 0; c < ch; ++c) {
          grad[o + c] += df[c] * inv;
        }
      }
    }
  }
}

// --- BlobCaptioner ---------------------------------------------------------

BlobCaptioner::BlobCaptioner(std::size_t vocab_size, std::size_t subject_index,
                             double lo, double hi)
    : vocab_size_(vocab_size), subject_(subject_index), lo_(lo), hi_(hi) {
  if (vocab_size < 2 || subject_index >= vocab_size) {
    throw std::invalid_argument("BlobCaptioner needs at least two words");
  }
  if (!(lo > 0.0 && lo < hi && hi < 1.0)) {
    throw std::invalid_argument("BlobCaptioner: need 0 < lo < hi < 1");
  }
}

std::vector<Distribution> BlobCaptioner::steps(const Image& crop) const {
  const double q = lo_ + (hi_ - lo_) * mean_intensity(crop);
  Distribution d(vocab_size_, (1.0 - q) / static_cast<double>(vocab_size_ - 1));
  d[subject_] = q;
  return {d};
}

void BlobCaptioner::backward(const Image& crop, std::span<const double> d_mean,
                             std::span<double> grad) const {
  double others = 0.0;
  for (std::size_t v = 0; v < vocab_size_; ++v) {
    if (v != subject_) {
      others += d_mean[v];
    }
  }
  const double dm = (hi_ - lo_) *
                    (d_mean[subject_] - others / static_cast<double>(vocab_size_ - 1));
  const double per_pixel = dm / static_cast<double>(crop.size());
  for (double& g : grad) {
    g += per_pixel;
  }
}

std::vector<Distribution> UniformCaptioner::steps(const Image&) const {
  return std::vector<Distribution>(
      steps_, Distribution(vocab_size_, 1.0 / static_cast<double>(vocab_size_)));
}

// --- ThirdsAesthetic -------------------------------------------------------

namespace {

constexpr double kThird = 1.0 / 3.0;

// Nearest of the four rule-of-thirds intersections.
std::array<double, 2> nearest_thirds_point(double cx, double cy) {
  return {cx < 0.0 ? -kThird : kThird, cy < 0.0 ? -kThird : kThird};
}

// Calls fn(a, b) for every included adjacent pixel pair (flat indices without
// channel offset). The set is symmetric under horizontal and vertical flips.
// Rows outside the horizontal bands only visit their left and right bands.
template <typename Fn>
std::size_t for_each_border_pair(const Image& crop, Fn&& fn) {
  const int h = crop.height();
  const int w = crop.width();
  const int bh = ThirdsAesthetic::band_width(h);
  const int bw = ThirdsAesthetic::band_width(w);
  std::size_t pairs = 0;
  for (int i = 0; i < h; ++i) {
    const bool row_in = i < bh || i >= h - bh;
    for (int j = 0; j + 1 < w; ++j) {
      if (!row_in && j == bw) {
        j = std::max(bw, w - bw - 1);
        if (j + 1 >= w) {
          break;
        }
      }
      fn(crop.index(i, j), crop.index(i, j + 1));
      ++pairs;
    }
  }
  for (int i = 0; i + 1 < h; ++i) {
    const bool pair_in = i < bh || i + 1 >= h - bh;
    for (int j = 0; j < w; ++j) {
      if (!pair_in && j == bw) {
        j = std::max(bw, w - bw);
        if (j >= w) {
          break;
        }
      }
      fn(crop.index(i, j), crop.index(i + 1, j));
      ++pairs;
    }
  }
  return pairs;
}

std::vector<double> grid_table(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    t[i] = kernels::grid_coordinate(i, n);
  }
  return t;
}

}  // namespace

std::array<double, 2> ThirdsAesthetic::centroid(const Image& crop) const {
  const int h = crop.height();
  const int w = crop.width();
  const int ch = crop.channels();
  const auto u = grid_table(w);
  const double* px = crop.data().data();
  double mass = kMassGuard;
  double sx = 0.0;
  double sy = 0.0;
  for (int i = 0; i < h; ++i) {
    const double v = kernels::grid_coordinate(i, h);
    double row_mass = 0.0;
    for (int j = 0; j < w; ++j, px += ch) {
      double inten = 0.0;
      for (int c = 0; c < ch; ++c) {
        inten += px[c];
      }
      inten /= ch;
      row_mass += inten;
      sx += inten * u[j];
    }
    mass += row_mass;
    sy += row_mass * v;
  }
  return {sx / mass, sy / mass};
}

double ThirdsAesthetic::border_energy(const Image& crop) const {
  const int ch = crop.channels();
  const auto px = crop.data();
  double acc = 0.0;
  const std::size_t pairs = for_each_border_pair(crop, [&](std::size_t a, std::size_t b) {
    for (int c = 0; c < ch; ++c) {
      const double d = px[b + c] - px[a + c];
      acc += d * d;
    }
  });
  return pairs == 0 ? 0.0 : acc / (static_cast<double>(pairs) * ch);
}

double ThirdsAesthetic::score(const Image& crop) const {
  const auto [cx, cy] = centroid(crop);
  const auto [tx, ty] = nearest_thirds_point(cx, cy);
  const double d2 = (cx - tx) * (cx - tx) + (cy - ty) * (cy - ty);
  const double dist = std::sqrt(d2 + kDelta * kDelta);
  return -w_.thirds * dist - w_.border * border_energy(crop);
}

void ThirdsAesthetic::backward(const Image& crop, double d_score,
                               std::span<double> grad) const {
  const int h = crop.height();
  const int w = crop.width();
  const int ch = crop.channels();

  if (w_.thirds != 0.0) {
    double mass = kMassGuard;
    for (double v : crop.data()) {
      mass += v / ch;
    }
    const auto [cx, cy] = centroid(crop);
    const auto [tx, ty] = nearest_thirds_point(cx, cy);
    const double dist =
        std::sqrt((cx - tx) * (cx - tx) + (cy - ty) * (cy - ty) + kDelta * kDelta);
    const double kx = -w_.thirds * d_score * (cx - tx) / dist / mass / ch;
    const double ky = -w_.thirds * d_score * (cy - ty) / dist / mass / ch;
    const auto u = grid_table(w);
    double* out = grad.data();
    for (int i = 0; i < h; ++i) {
      const double dv = ky * (kernels::grid_coordinate(i, h) - cy);
      for (int j = 0; j < w; ++j, out += ch) {
        const double g = kx * (u[j] - cx) + dv;
        for (int c = 0; c < ch; ++c) {
          out[c] += g;
        }
      }
    }
  }

  if (w_.border != 0.0) {
    const auto px = crop.data();
    std::size_t pairs = for_each_border_pair(crop, [](std::size_t, std::size_t) {});
    if (pairs == 0) {
      return;
    }
    const double k = -w_.border * d_score * 2.0 / (static_cast<double>(pairs) * ch);
    for_each_border_pair(crop, [&](std::size_t a, std::size_t b) {
      for (int c = 0; c < ch; ++c) {
        const double d = px[b + c] - px[a + c];
        grad[b + c] += k * d;
        grad[a + c] -= k * d;
      }
    });
  }
}

double MeanIntensityAesthetic::score(const Image& crop) const {
  return mean_intensity(crop);
}

void MeanIntensityAesthetic::backward(const Image& crop, double d_score,
                                      std::span<double> grad) const {
  const double g = d_score / static_cast<double>(crop.size());
  for (double& v : grad) {
    v += g;
  }
}

// --- CompositeScorer -------------------------------------------------------

CompositeScorer::CompositeScorer(std::shared_ptr<const CaptionModel> captioner,
                                 std::shared_ptr<const AestheticModel> aesthetic,
                                 int input_size)
    : captioner_(std::move(captioner)),
      aesthetic_(std::move(aesthetic)),
      input_size_(input_size) {
  if (!captioner_ || !aesthetic_) {
    throw std::invalid_argument("CompositeScorer: null model");
  }
}

ScoreOutput CompositeScorer::evaluate(const Image& crop) {
  return {captioner_->steps(crop), aesthetic_->score(crop)};
}

std::vector<double> CompositeScorer::backward(const Image& crop,
                                              std::span<const double> d_mean,
                                              double d_aesthetic) {
  std::vector<double> grad(crop.size(), 0.0);
  captioner_->backward(crop, d_mean, grad);
  if (d_aesthetic != 0.0) {
    aesthetic_->backward(crop, d_aesthetic, grad);
  }
  return grad;
}

// --- factory ---------------------------------------------------------------

namespace {

std::map<std::string, double> parse_options(std::string_view text) {
  std::map<std::string, double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("scorer option '" + std::string(item) +
                                  "' is not key=value");
    }
    const std::string value(item.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw std::invalid_argument("scorer option '" + std::string(item) +
                                  "' has a non-numeric value");
    }
    out[std::string(item.substr(0, eq))] = v;
    if (comma == std::string_view::npos) {
      break;
    }
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::shared_ptr<Scorer> make_builtin_scorer(std::string_view spec,
                                            std::size_t vocab_size) {
  const auto colon = spec.find(':');
  const std::string name(spec.substr(0, colon));
  auto opts = parse_options(colon == std::string_view::npos ? std::string_view{}
                                                            : spec.substr(colon + 1));
  const auto take = [&](const std::string& key, double fallback) {
    const auto it = opts.find(key);
    if (it == opts.end()) {
      return fallback;
    }
    const double v = it->second;
    opts.erase(it);
    return v;
  };
  const int size = static_cast<int>(take("size", 0));

  std::shared_ptr<Scorer> scorer;
  if (name == "builtin") {
    const auto seed = static_cast<std::uint64_t>(take("seed", kDefaultScorerSeed));
    const int steps = static_cast<int>(take("steps", 5));
    const int grid = static_cast<int>(take("grid", 4));
    const double scale = take("scale", 4.0);
    ThirdsAesthetic::Weights w{take("thirds", 1.0), take("border", 1.0)};
    scorer = std::make_shared<CompositeScorer>(
        std::make_shared<SoftCaptioner>(vocab_size, seed, steps, grid, scale),
        std::make_shared<ThirdsAesthetic>(w), size);
  } else if (name == "blob") {
    scorer = std::make_shared<CompositeScorer>(
        std::make_shared<BlobCaptioner>(vocab_size),
        std::make_shared<MeanIntensityAesthetic>(), size);
  } else if (name == "blob-thirds") {
    ThirdsAesthetic::Weights w{take("w", 100.0), 0.0};
    scorer = std::make_shared<CompositeScorer>(
        std::make_shared<BlobCaptioner>(vocab_size),
        std::make_shared<ThirdsAesthetic>(w), size);
  } else if (name == "constant") {
    scorer = std::make_shared<CompositeScorer>(
        std::make_shared<UniformCaptioner>(vocab_size),
        std::make_shared<ConstantAesthetic>(take("value", 0.0)), size);
  } else if (name == "echo") {
    scorer = std::make_shared<CompositeScorer>(
        std::make_shared<UniformCaptioner>(vocab_size),
        std::make_shared<MeanIntensityAesthetic>(), size);
  } else {
    throw std::invalid_argument("unknown builtin scorer '" + name + "'");
  }
  if (!opts.empty()) {
    throw std::invalid_argument("unknown option '" + opts.begin()->first +
                                "' for scorer " + name);
  }
  return scorer;
}

}  // namespace capcrop
