#include "capcrop/objective.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "capcrop/error.hpp"

namespace capcrop {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw VocabularyError("vocabulary is empty");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || std::any_of(t.begin(), t.end(), [](unsigned char c) {
          return std::isspace(c) != 0;
        })) {
      throw VocabularyError("invalid vocabulary token at position " +
                            std::to_string(i));
    }
    if (!index_.emplace(t, i).second) {
      throw VocabularyError("duplicate vocabulary token '" + t + "'");
    }
  }
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      tokens.push_back(line);
    }
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open vocabulary file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

std::string Vocabulary::hash() const {
  const std::string text = serialize();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char b : digest) {
    hex += kHex[b >> 4];
    hex += kHex[b & 0xf];
  }
  return hex;
}

const Vocabulary& default_vocabulary() {
  static const Vocabulary vocab({
      "subject", "background", "dog",    "cat",    "person", "man",
      "woman",   "child",      "tree",   "sky",    "grass",  "water",
      "car",     "building",   "road",   "sun",    "cloud",  "flower",
      "bird",    "boat",       "mountain", "beach", "table", "food",
      "ball",    "horse",      "street", "snow",   "city",   "field",
      "light",   "window",
  });
  return vocab;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    } else if (!std::ispunct(c)) {
      cur += static_cast<char>(std::tolower(c));
    }
  }
  if (!cur.empty()) {
    words.push_back(std::move(cur));
  }
  return words;
}

CaptionBag bag_from_text(std::string_view text, const Vocabulary& vocab) {
  CaptionBag bag;
  bag.probs.assign(vocab.size(), 0.0);
  std::vector<std::size_t> counts(vocab.size(), 0);
  for (const auto& w : tokenize(text)) {
    if (const auto idx = vocab.find(w)) {
      ++counts[*idx];
      ++bag.source_len;
    } else {
      ++bag.dropped;
    }
  }
  if (bag.source_len == 0) {
    throw EmptyCaptionError("caption has no in-vocabulary words");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    bag.probs[i] = static_cast<double>(counts[i]) / bag.source_len;
  }
  return bag;
}

std::vector<double> CaptionLoss::step_gradient() const {
  std::vector<double> g(d_mean);
  for (double& v : g) {
    v /= static_cast<double>(steps);
  }
  return g;
}

Distribution mean_distribution(std::span<const Distribution> steps) {
  if (steps.empty()) {
    throw VocabularyError("no generated steps");
  }
  const std::size_t v = steps.front().size();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].size() != v) {
      throw VocabularyError("generated step " + std::to_string(t) +
                            " has a different vocabulary size");
    }
  }
  // Each word's values are summed in sorted order so the mean does not depend
  // on the order of the steps, not even in the last bit.
  Distribution q(v, 0.0);
  std::vector<double> column(steps.size());
  for (std::size_t w = 0; w < v; ++w) {
    for (std::size_t t = 0; t < steps.size(); ++t) {
      column[t] = steps[t][w];
    }
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double c : column) {
      sum += c;
    }
    q[w] = sum / static_cast<double>(steps.size());
  }
  return q;
}

CaptionLoss caption_loss(const CaptionBag& user,
                         std::span<const Distribution> generated_steps,
                         double eps) {
  const Distribution q = mean_distribution(generated_steps);
  if (q.size() != user.probs.size()) {
    throw VocabularyError("caption bag has " + std::to_string(user.probs.size()) +
                          " words, scorer produced " + std::to_string(q.size()));
  }
  CaptionLoss out;
  out.steps = generated_steps.size();
  out.d_mean.assign(q.size(), 0.0);
  for (std::size_t w = 0; w < q.size(); ++w) {
    const double p = user.probs[w];
    if (p == 0.0) {
      continue;
    }
    // Floor at eps: guards log(0) and keeps an exact zero loss at q = p one-hot.
    if (q[w] > eps) {
      out.value -= p * std::log(q[w]);
      out.d_mean[w] = -p / q[w];
    } else {
      out.value -= p * std::log(eps);
    }
  }
  return out;
}

double aesthetic_loss(double score) {
  if (!std::isfinite(score)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    throw NumericError("non-finite aesthetic score", {nan, nan});
  }
  return -score;
}

std::vector<double> Scorer::backward(const Image&, std::span<const double>, double) {
  throw ScorerError("scorer does not provide pixel gradients");
}

LossReport total_loss(const CropResult& crop, const CaptionBag& user,
                      Scorer& scorer, double lambda) {
  const int want = scorer.input_size();
  if (want != 0 && (crop.image.width() != want || crop.image.height() != want)) {
    throw ScorerError("scorer expects " + std::to_string(want) + "x" +
                      std::to_string(want) + " crops, got " +
                      std::to_string(crop.image.width()));
  }
  const ScoreOutput out = scorer.evaluate(crop.image);
  const CaptionLoss cap = caption_loss(user, out.caption_steps);

  LossReport r;
  r.caption_term = cap.value;
  r.aesthetic_term = aesthetic_loss(out.aesthetic);
  r.total = r.caption_term + lambda * r.aesthetic_term;

  if (scorer.provides_gradients() && crop.has_jacobian()) {
    const auto g = scorer.backward(crop.image, cap.d_mean, -lambda);
    if (g.size() != crop.image.size()) {
      throw ScorerError("scorer returned a pixel gradient of the wrong size");
    }
    double gx = 0.0;
    double gy = 0.0;
    double gs = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      gx += g[k] * crop.jacobian.dx[k];
      gy += g[k] * crop.jacobian.dy[k];
    }
    if (!crop.jacobian.ds.empty()) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        gs += g[k] * crop.jacobian.ds[k];
      }
    }
    r.grad_theta = {gx, gy, gs};
    r.grad_available = true;
  }
  return r;
}

LossReport loss_at(const Pyramid& pyr, const CropParams& theta,
                   const CaptionBag& user, Scorer& scorer, double lambda,
                   int out_size, Derivatives derivs) {
  if (!scorer.provides_gradients()) {
    derivs = Derivatives::none;
  }
  return total_loss(multiscale_crop(pyr, theta, out_size, derivs), user, scorer,
                    lambda);
}

}  // namespace capcrop
