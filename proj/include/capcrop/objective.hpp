#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capcrop/image.hpp"
#include "capcrop/sampler.hpp"

namespace capcrop {

class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  // One token per line; blank lines are skipped.
  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary parse(std::string_view text);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<std::size_t> find(std::string_view word) const;

  // Canonical file content: every token followed by '\n'.
  std::string serialize() const;
  // Hex SHA-256 of serialize(); shared with external scorers at handshake.
  std::string hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Built-in word list used when no vocabulary file is given.
const Vocabulary& default_vocabulary();

// Lowercase, drop ASCII punctuation, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

struct CaptionBag {
  std::vector<double> probs;
  std::size_t source_len = 0;  // recognized tokens
  std::size_t dropped = 0;     // out-of-vocabulary tokens
};

CaptionBag bag_from_text(std::string_view text, const Vocabulary& vocab);

inline constexpr double kCrossEntropyEps = 1e-8;

using Distribution = std::vector<double>;

struct CaptionLoss {
  double value = 0.0;
  // d value / d q_w where q is the mean generated distribution.
  std::vector<double> d_mean;
  std::size_t steps = 0;

  // Gradient w.r.t. any single generated step (identical for every step).
  std::vector<double> step_gradient() const;
};

Distribution mean_distribution(std::span<const Distribution> steps);

CaptionLoss caption_loss(const CaptionBag& user,
                         std::span<const Distribution> generated_steps,
                         double eps = kCrossEntropyEps);

double aesthetic_loss(double score);

struct ScoreOutput {
  std::vector<Distribution> caption_steps;
  double aesthetic = 0.0;
};

// Anything that maps a crop to caption word-step distributions and an
// aesthetic score. Gradients are optional.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::size_t vocab_size() const = 0;
  // Required crop side length, 0 when any size is accepted.
  virtual int input_size() const { return 0; }
  virtual bool concurrent_safe() const { return true; }
  virtual bool provides_gradients() const { return false; }

  virtual ScoreOutput evaluate(const Image& crop) = 0;

  // d/d(pixel) of  d_mean . mean_t(step_t) + d_aesthetic * g,
  // laid out like crop.data().
  virtual std::vector<double> backward(const Image& crop,
                                       std::span<const double> d_mean,
                                       double d_aesthetic);
};

struct LossReport {
  double caption_term = 0.0;
  double aesthetic_term = 0.0;
  double total = 0.0;
  // d total / d (x, y, s); the s entry stays 0 unless the crop carried it.
  std::array<double, 3> grad_theta{};
  bool grad_available = false;
};

LossReport total_loss(const CropResult& crop, const CaptionBag& user,
                      Scorer& scorer, double lambda);

// multiscale_crop + total_loss at a feasible theta.
LossReport loss_at(const Pyramid& pyr, const CropParams& theta,
                   const CaptionBag& user, Scorer& scorer, double lambda,
                   int out_size, Derivatives derivs);

}  // namespace capcrop
