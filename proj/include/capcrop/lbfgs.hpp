#pragma once

#include <functional>
#include <span>
#include <vector>

namespace capcrop {

struct SolverConfig {
  int memory = 10;
  int max_iters = 50;
  double grad_tol = 1e-6;
  double step_tol = 1e-9;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 20;
  // The zoom phase gives up once the bracket is narrower than this fraction
  // of its upper end (kinks in piecewise-linear objectives otherwise eat the
  // whole budget).
  double line_search_xtol = 0.1;
  // Curvature pairs with s.y at or below this are dropped.
  double min_curvature = 1e-10;

  void validate() const;
};

// Per-coordinate box; infinite bounds are allowed.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  static Bounds unbounded(std::size_t dim);
  static Bounds uniform(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  void project(std::span<double> x) const;
};

enum class Termination { gradient, step, max_iters, line_search_failure };

const char* to_string(Termination t);

struct Iterate {
  std::vector<double> point;
  double loss = 0.0;
  double grad_norm = 0.0;  // projected gradient, infinity norm
};

struct SolveTrace {
  std::vector<Iterate> iterates;  // starting point first, then accepted steps
  Termination termination = Termination::max_iters;
  int evaluations = 0;
  int skipped_pairs = 0;
  std::vector<double> accepted_curvature;  // s.y of every stored pair
};

struct SolveResult {
  std::vector<double> argmin;
  double loss = 0.0;
  SolveTrace trace;
};

// Returns the loss at x and writes the gradient into grad.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

// L-BFGS (two-loop recursion) with a strong-Wolfe line search. Every trial
// point is clamped into `box` before it is evaluated. Throws NumericError on a
// non-finite loss or gradient.
SolveResult lbfgs_minimize(const Objective& f, std::vector<double> x0,
                           const Bounds& box, const SolverConfig& cfg = {});

}  // namespace capcrop
