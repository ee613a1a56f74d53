#pragma once

// Smooth in-process stand-ins for the captioning and aesthetic networks.

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "capcrop/objective.hpp"

namespace capcrop {

class CaptionModel {
 public:
  virtual ~CaptionModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<Distribution> steps(const Image& crop) const = 0;
  // Accumulates d(d_mean . mean_step)/d(pixel) into grad.
  virtual void backward(const Image& crop, std::span<const double> d_mean,
                        std::span<double> grad) const = 0;
};

class AestheticModel {
 public:
  virtual ~AestheticModel() = default;
  virtual double score(const Image& crop) const = 0;
  // Accumulates d_score * dg/d(pixel) into grad.
  virtual void backward(const Image& crop, double d_score,
                        std::span<double> grad) const = 0;
};

// softmax(W_t * features + b_t) per step, where features are per-channel means
// over a grid x grid partition of the crop. Gray crops reuse their single
// channel for all three colour features.
class SoftCaptioner final : public CaptionModel {
 public:
  SoftCaptioner(std::size_t vocab_size, std::uint64_t seed, int steps = 5,
                int grid = 4, double weight_scale = 4.0);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<Distribution> steps(const Image& crop) const override;
  void backward(const Image& crop, std::span<const double> d_mean,
                std::span<double> grad) const override;

  int grid() const { return grid_; }
  int step_count() const { return steps_; }

 private:
  static constexpr int kFeatureChannels = 3;

  std::size_t feature_count() const;
  std::vector<double> features(const Image& crop) const;
  std::vector<double> step_probs(std::span<const double> feats, int t) const;
  int cell_of(int i, int n) const { return i * grid_ / n; }

  std::size_t vocab_size_;
  int steps_;
  int grid_;
  std::vector<double> weights_;  // [step][word][feature]
  std::vector<double> bias_;     // [step][word]
};

// One step: P(subject) = lo + (hi - lo) * mean intensity, the rest spread
// evenly over the other words. Gives a bowl-shaped loss around bright content.
class BlobCaptioner final : public CaptionModel {
 public:
  BlobCaptioner(std::size_t vocab_size, std::size_t subject_index = 0,
                double lo = 0.05, double hi = 0.95);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<Distribution> steps(const Image& crop) const override;
  void backward(const Image& crop, std::span<const double> d_mean,
                std::span<double> grad) const override;

 private:
  std::size_t vocab_size_;
  std::size_t subject_;
  double lo_;
  double hi_;
};

// T uniform steps regardless of input.
class UniformCaptioner final : public CaptionModel {
 public:
  explicit UniformCaptioner(std::size_t vocab_size, int steps = 1)
      : vocab_size_(vocab_size), steps_(steps) {}

  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<Distribution> steps(const Image& crop) const override;
  void backward(const Image&, std::span<const double>,
                std::span<double>) const override {}

 private:
  std::size_t vocab_size_;
  int steps_;
};

// score = -w_thirds * dist(centroid, nearest thirds point)
//         - w_border * mean squared intensity step in the border band.
// The centroid is intensity weighted in normalized crop coordinates and the
// distance is smoothed as sqrt(d^2 + delta^2).
class ThirdsAesthetic final : public AestheticModel {
 public:
  struct Weights {
    double thirds = 1.0;
    double border = 1.0;
  };

  ThirdsAesthetic() = default;
  explicit ThirdsAesthetic(Weights w) : w_(w) {}

  double score(const Image& crop) const override;
  void backward(const Image& crop, double d_score,
                std::span<double> grad) const override;

  static constexpr double kDelta = 1e-3;
  static constexpr double kMassGuard = 1e-9;
  static int band_width(int n) { return n >= 32 ? n / 16 : 1; }

  double border_energy(const Image& crop) const;
  std::array<double, 2> centroid(const Image& crop) const;

 private:
  Weights w_;
};

class MeanIntensityAesthetic final : public AestheticModel {
 public:
  double score(const Image& crop) const override;
  void backward(const Image& crop, double d_score,
                std::span<double> grad) const override;
};

class ConstantAesthetic final : public AestheticModel {
 public:
  explicit ConstantAesthetic(double value) : value_(value) {}
  double score(const Image&) const override { return value_; }
  void backward(const Image&, double, std::span<double>) const override {}

 private:
  double value_;
};

// Captioner + aesthetic model behind the Scorer contract. Stateless, so safe
// for concurrent evaluation.
class CompositeScorer final : public Scorer {
 public:
  CompositeScorer(std::shared_ptr<const CaptionModel> captioner,
                  std::shared_ptr<const AestheticModel> aesthetic,
                  int input_size = 0);

  std::size_t vocab_size() const override { return captioner_->vocab_size(); }
  int input_size() const override { return input_size_; }
  bool provides_gradients() const override { return true; }

  ScoreOutput evaluate(const Image& crop) override;
  std::vector<double> backward(const Image& crop, std::span<const double> d_mean,
                               double d_aesthetic) override;

 private:
  std::shared_ptr<const CaptionModel> captioner_;
  std::shared_ptr<const AestheticModel> aesthetic_;
  int input_size_;
};

// Hides a scorer's gradients so callers exercise the finite-difference path.
class GradientFreeScorer final : public Scorer {
 public:
  explicit GradientFreeScorer(std::shared_ptr<Scorer> inner)
      : inner_(std::move(inner)) {}

  std::size_t vocab_size() const override { return inner_->vocab_size(); }
  int input_size() const override { return inner_->input_size(); }
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }
  ScoreOutput evaluate(const Image& crop) override {
    return inner_->evaluate(crop);
  }

 private:
  std::shared_ptr<Scorer> inner_;
};

inline constexpr std::uint64_t kDefaultScorerSeed = 20210901;

// Built-in scorer by name:
//   builtin      SoftCaptioner + ThirdsAesthetic
//   blob         BlobCaptioner (subject = word 0) + MeanIntensityAesthetic
//   blob-thirds  BlobCaptioner + ThirdsAesthetic{thirds = 100, border = 0}
//   constant     UniformCaptioner + ConstantAesthetic(0)
//   echo         UniformCaptioner + MeanIntensityAesthetic (in-process twin
//                of the reference echo server)
// Options follow a colon, e.g. "builtin:seed=7,steps=3", "blob-thirds:w=50".
std::shared_ptr<Scorer> make_builtin_scorer(std::string_view spec,
                                            std::size_t vocab_size);

}  // namespace capcrop
