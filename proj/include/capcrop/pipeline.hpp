#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "capcrop/error.hpp"
#include "capcrop/image.hpp"
#include "capcrop/lbfgs.hpp"
#include "capcrop/objective.hpp"
#include "capcrop/sampler.hpp"

namespace capcrop {

using Point = std::array<double, 2>;

enum class NoiseKind { gaussian, uniform };

struct RunConfig {
  double anneal_factor = 0.98;
  double min_scale = 0.25;
  int restarts = 10;
  double noise_sigma = 0.05;
  NoiseKind noise_kind = NoiseKind::gaussian;
  double lambda = 0.01;
  std::vector<double> scale_set{0.25, 1.0 / 3.0, 0.5, 1.0};
  BlurPolicy blur;
  int out_size = kDefaultOutSize;
  std::uint64_t rng_seed = 0;
  double fd_step = 1e-3;
  int max_iterations = 0;  // 0: run until the scale drops below min_scale
  SolverConfig solver;

  // Called (serialized) with every theta handed to the scorer.
  std::function<void(const CropParams&)> on_evaluate;

  void validate() const;
};

struct RestartRecord {
  Point start{};
  Point optimum{};
  double loss = 0.0;
  Termination termination = Termination::max_iters;
  int evaluations = 0;
};

struct ScaleRecord {
  double scale = 1.0;
  std::vector<RestartRecord> restarts;
  Point mean{};         // mean of the restart optima, feasible at this scale
  double mean_loss = 0.0;
  Point next_center{};  // mean clipped at the next scale
  double best_loss = 0.0;  // global best after this scale
};

struct CropRun {
  CropParams best_theta;
  double best_loss = 0.0;
  std::vector<ScaleRecord> per_scale;
  int iterations_run = 0;
};

// Scorer or numeric failure mid-run; carries everything completed so far.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& what, CropRun partial)
      : Error(what), partial_(std::move(partial)) {}
  const CropRun& partial() const { return partial_; }

 private:
  CropRun partial_;
};

double anneal_scale(int i, double factor);

// factor^i for i = 0, 1, ... while >= min_scale (capped by max_iterations).
std::vector<double> scale_schedule(const RunConfig& cfg);

Point perturb(Point center, double scale, double sigma, NoiseKind kind,
              std::mt19937_64& rng);

struct RestartOutcome {
  Point optimum{};
  double loss = 0.0;
  SolveTrace trace;
};

RestartOutcome restart_solve(const Pyramid& pyr, const CaptionBag& user,
                             Scorer& scorer, double scale, Point start,
                             const RunConfig& cfg);

// Coordinate-wise mean. Summation runs over the sorted points, so the result
// does not depend on the order of `optima`.
Point mean_point(std::span<const Point> optima);

// mean_point clipped into the feasible box of next_scale.
Point aggregate_restarts(std::span<const Point> optima, double next_scale);

// One outer iteration: restart_solve from every start (concurrently when the
// scorer allows it), then aggregate.
ScaleRecord run_scale(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                      double scale, double next_scale, std::span<const Point> starts,
                      const RunConfig& cfg);

CropRun run(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
            const RunConfig& cfg);

CropRun run(const Image& image, std::string_view caption, const Vocabulary& vocab,
            Scorer& scorer, const RunConfig& cfg);

// One JSON object per line: a "restart" record per restart and an "aggregate"
// record per scale.
void write_trace(const CropRun& run, std::ostream& out);

}  // namespace capcrop
