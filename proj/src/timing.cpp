#include "capcrop/timing.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace capcrop {

std::vector<IterationTiming> time_outer_iterations(const Pyramid& pyr, const CaptionBag& user,
                                                   Scorer& scorer, const RunConfig& cfg,
                                                   int iterations) {
  if (iterations < 0) {
    throw std::invalid_argument("iteration count must be >= 0");
  }
  const auto schedule = scale_schedule(cfg);
  const int last = static_cast<int>(schedule.size()) - 1;
  std::atomic<long> calls{0};
  RunConfig counted = cfg;
  counted.on_evaluate = [&](const CropParams& theta) {
    ++calls;
    if (cfg.on_evaluate) {
      cfg.on_evaluate(theta);
    }
  };

  std::vector<IterationTiming> rows;
  for (int k = 0; k < iterations; ++k) {
    const int i = iterations == 1 ? last / 2 : k * last / (iterations - 1);
    const double scale = schedule[i];
    const double next = anneal_scale(i + 1, cfg.anneal_factor);
    std::mt19937_64 rng(cfg.rng_seed + static_cast<std::uint64_t>(i));
    std::vector<Point> starts;
    for (int r = 0; r < cfg.restarts; ++r) {
      starts.push_back(perturb({0.0, 0.0}, scale, cfg.noise_sigma, cfg.noise_kind, rng));
    }
    calls = 0;
    const auto t0 = std::chrono::steady_clock::now();
    run_scale(pyr, user, scorer, scale, next, starts, counted);
    const auto t1 = std::chrono::steady_clock::now();
    rows.push_back({i, scale, std::chrono::duration<double>(t1 - t0).count(), calls.load()});
  }
  return rows;
}

void write_timing_table(const std::vector<IterationTiming>& rows, std::ostream& out) {
  out << "iteration     scale   seconds  scorer_calls  ms_per_call\n";
  char line[128];
  for (const auto& r : rows) {
    const double per_call = r.scorer_calls > 0 ? 1e3 * r.seconds / r.scorer_calls : 0.0;
    std::snprintf(line, sizeof line, "%9d  %8.5f  %8.4f  %12ld  %11.4f\n", r.index, r.scale,
                  r.seconds, r.scorer_calls, per_call);
    out << line;
  }
}

}  // namespace capcrop
