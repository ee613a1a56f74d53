#include "capcrop/bag_fixtures.hpp"

#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "capcrop/objective.hpp"

namespace capcrop {

std::string bag_loss_fixtures(int count, std::uint64_t seed, int vocab_size) {
  if (count < 0 || vocab_size < 2) {
    throw std::invalid_argument("bag fixtures: count must be >= 0 and vocab_size >= 2");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> word(0, vocab_size - 1);
  std::uniform_int_distribution<int> len(1, 6);
  std::ostringstream out;
  for (int n = 0; n < count; ++n) {
    std::vector<double> user(vocab_size, 0.0);
    const int words = len(rng);
    for (int k = 0; k < words; ++k) {
      user[word(rng)] += 1.0 / words;
    }
    std::vector<Distribution> steps(len(rng));
    for (auto& d : steps) {
      d.assign(vocab_size, 0.0);
      double sum = 0.0;
      for (auto& v : d) {
        v = (n % 4 == 3 && unit(rng) < 0.3) ? 0.0 : unit(rng) * unit(rng);
        sum += v;
      }
      if (sum == 0.0) {
        d[0] = sum = 1.0;
      }
      for (auto& v : d) {
        v /= sum;
      }
    }
    const CaptionBag bag{user, static_cast<std::size_t>(words), 0};
    const CaptionLoss loss = caption_loss(bag, steps);
    nlohmann::ordered_json j;
    char id[32];
    std::snprintf(id, sizeof id, "bag-%04d", n);
    j["id"] = id;
    j["eps"] = kCrossEntropyEps;
    j["user"] = user;
    j["steps"] = steps;
    j["expected"] = loss.value;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace capcrop
