#include "capcrop/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>

#include "capcrop/error.hpp"

namespace capcrop {

void SolverConfig::validate() const {
  if (memory < 1) {
    throw std::invalid_argument("SolverConfig: memory must be >= 1");
  }
  if (max_iters < 0 || max_line_search < 1) {
    throw std::invalid_argument("SolverConfig: bad iteration limits");
  }
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw std::invalid_argument("SolverConfig: need 0 < c1 < c2 < 1");
  }
  if (!(line_search_xtol >= 0.0 && line_search_xtol < 1.0)) {
    throw std::invalid_argument("SolverConfig: line_search_xtol must lie in [0, 1)");
  }
}

Bounds Bounds::unbounded(std::size_t dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {std::vector<double>(dim, -inf), std::vector<double>(dim, inf)};
}

Bounds Bounds::uniform(std::size_t dim, double lo, double hi) {
  return {std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

bool Bounds::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] || x[i] > upper[i]) {
      return false;
    }
  }
  return true;
}

void Bounds::project(std::span<double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::clamp(x[i], lower[i], upper[i]);
  }
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::gradient:
      return "gradient";
    case Termination::step:
      return "step";
    case Termination::max_iters:
      return "max-iters";
    case Termination::line_search_failure:
      return "line-search-failure";
  }
  return "unknown";
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double inf_norm(const Vec& a) {
  double m = 0.0;
  for (double v : a) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

struct Pair {
  Vec s;
  Vec y;
  double rho;
};

// A point of the 1-D restriction phi(a) = f(P(x + a d)).
struct Probe {
  double alpha = 0.0;
  Vec x;
  Vec g;
  double f = 0.0;
  double dphi = 0.0;
};

class Problem {
 public:
  Problem(const Objective& f, const Bounds& box, SolveTrace& trace)
      : f_(f), box_(box), trace_(trace) {}

  double eval(const Vec& x, Vec& g) {
    g.assign(x.size(), 0.0);
    const double v = f_(x, g);
    ++trace_.evaluations;
    const bool finite = std::isfinite(v) &&
                        std::all_of(g.begin(), g.end(), [](double e) { return std::isfinite(e); });
    if (!finite) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      throw NumericError("objective returned a non-finite value",
                         {x.empty() ? nan : x[0], x.size() < 2 ? nan : x[1]});
    }
    return v;
  }

  double projected_grad_norm(const Vec& x, const Vec& g) const {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if ((x[i] <= box_.lower[i] && g[i] > 0.0) || (x[i] >= box_.upper[i] && g[i] < 0.0)) {
        continue;
      }
      m = std::max(m, std::abs(g[i]));
    }
    return m;
  }

  // Zero the components of d that would immediately leave the box.
  void block(const Vec& x, Vec& d) const {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if ((x[i] <= box_.lower[i] && d[i] < 0.0) || (x[i] >= box_.upper[i] && d[i] > 0.0)) {
        d[i] = 0.0;
      }
    }
  }

  Probe probe(const Vec& x, const Vec& d, double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      p.x[i] = x[i] + alpha * d[i];
    }
    box_.project(p.x);
    p.f = eval(p.x, p.g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double raw = x[i] + alpha * d[i];
      if (raw >= box_.lower[i] && raw <= box_.upper[i]) {
        p.dphi += p.g[i] * d[i];
      }
    }
    return p;
  }

 private:
  const Objective& f_;
  const Bounds& box_;
  SolveTrace& trace_;
};

double cubic_minimizer(const Probe& a, const Probe& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double width = hi - lo;
  const double d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double den = b.dphi - a.dphi + 2.0 * d2;
    if (den != 0.0) {
      const double c = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / den;
      if (std::isfinite(c)) {
        t = c;
      }
    }
  }
  // keep the trial away from the bracket ends
  if (t < lo + 0.1 * width || t > hi - 0.1 * width) {
    t = 0.5 * (lo + hi);
  }
  return t;
}

struct SearchResult {
  std::optional<Probe> accepted;  // strong-Wolfe point
  std::optional<Probe> fallback;  // best sufficient-decrease point seen
};

SearchResult strong_wolfe(Problem& prob, const Vec& x, double f0, double dphi0,
                          const Vec& d, double alpha0, const SolverConfig& cfg) {
  SearchResult res;
  const auto armijo = [&](const Probe& p) {
    return p.f <= f0 + cfg.wolfe_c1 * p.alpha * dphi0 && p.f < f0;
  };
  const auto curvature = [&](const Probe& p) {
    return std::abs(p.dphi) <= -cfg.wolfe_c2 * dphi0;
  };
  const auto remember = [&](const Probe& p) {
    if (armijo(p) && (!res.fallback || p.f < res.fallback->f)) {
      res.fallback = p;
    }
  };

  Probe prev;
  prev.alpha = 0.0;
  prev.x = x;
  prev.f = f0;
  prev.dphi = dphi0;
  double alpha = alpha0;
  int budget = cfg.max_line_search;

  std::optional<Probe> lo;
  std::optional<Probe> hi;
  for (int it = 0; budget > 0; ++it) {
    Probe p = prob.probe(x, d, alpha);
    --budget;
    remember(p);
    if (!armijo(p) || (it > 0 && p.f >= prev.f)) {
      lo = prev;
      hi = p;
      break;
    }
    if (curvature(p)) {
      res.accepted = p;
      return res;
    }
    if (p.dphi >= 0.0) {
      lo = p;
      hi = prev;
      break;
    }
    prev = p;
    alpha *= 2.0;
  }
  if (!lo) {
    return res;
  }

  while (budget > 0) {
    const double wide = std::max(lo->alpha, hi->alpha);
    const double tol = std::max(cfg.line_search_xtol, std::numeric_limits<double>::epsilon());
    if (std::abs(hi->alpha - lo->alpha) <= tol * wide) {
      break;
    }
    const double a = cubic_minimizer(*lo, *hi);
    Probe p = prob.probe(x, d, a);
    --budget;
    remember(p);
    if (!armijo(p) || p.f >= lo->f) {
      hi = p;
    } else {
      if (curvature(p)) {
        res.accepted = p;
        return res;
      }
      if (p.dphi * (hi->alpha - lo->alpha) >= 0.0) {
        hi = lo;
      }
      lo = p;
    }
  }
  return res;
}

// H * v via the two-loop recursion, H0 = gamma I.
Vec two_loop(const std::deque<Pair>& pairs, const Vec& g) {
  Vec q = g;
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    alpha[k] = pairs[k].rho * dot(pairs[k].s, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] -= alpha[k] * pairs[k].y[i];
    }
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) {
      v *= gamma;
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double beta = pairs[k].rho * dot(pairs[k].y, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] += pairs[k].s[i] * (alpha[k] - beta);
    }
  }
  return q;
}

}  // namespace

SolveResult lbfgs_minimize(const Objective& f, std::vector<double> x0,
                           const Bounds& box, const SolverConfig& cfg) {
  cfg.validate();
  if (box.lower.size() != x0.size() || box.upper.size() != x0.size()) {
    throw std::invalid_argument("lbfgs_minimize: bounds dimension mismatch");
  }
  if (!box.contains(x0)) {
    throw std::invalid_argument("lbfgs_minimize: start point outside the box");
  }

  SolveResult out;
  SolveTrace& trace = out.trace;
  Problem prob(f, box, trace);

  Vec x = std::move(x0);
  Vec g;
  double fx = prob.eval(x, g);
  trace.iterates.push_back({x, fx, prob.projected_grad_norm(x, g)});

  std::deque<Pair> pairs;
  trace.termination = Termination::max_iters;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    if (prob.projected_grad_norm(x, g) <= cfg.grad_tol) {
      trace.termination = Termination::gradient;
      break;
    }

    Vec d = two_loop(pairs, g);
    for (double& v : d) {
      v = -v;
    }
    prob.block(x, d);
    double dphi0 = dot(g, d);
    if (!(dphi0 < 0.0)) {
      pairs.clear();
      d = g;
      for (double& v : d) {
        v = -v;
      }
      prob.block(x, d);
      dphi0 = dot(g, d);
      if (!(dphi0 < 0.0)) {
        trace.termination = Termination::gradient;
        break;
      }
    }

    const double alpha0 = pairs.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(d, d))) : 1.0;
    auto ls = strong_wolfe(prob, x, fx, dphi0, d, alpha0, cfg);
    const bool failed = !ls.accepted;
    std::optional<Probe> step = failed ? ls.fallback : ls.accepted;
    if (!step) {
      trace.termination = Termination::line_search_failure;
      break;
    }

    Vec s(x.size());
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      s[i] = step->x[i] - x[i];
      y[i] = step->g[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > cfg.min_curvature) {
      pairs.push_back({s, y, 1.0 / sy});
      trace.accepted_curvature.push_back(sy);
      if (static_cast<int>(pairs.size()) > cfg.memory) {
        pairs.pop_front();
      }
    } else {
      ++trace.skipped_pairs;
    }

    x = std::move(step->x);
    g = std::move(step->g);
    fx = step->f;
    trace.iterates.push_back({x, fx, prob.projected_grad_norm(x, g)});

    if (failed) {
      trace.termination = Termination::line_search_failure;
      break;
    }
    if (inf_norm(s) <= cfg.step_tol) {
      trace.termination = Termination::step;
      break;
    }
  }
  if (trace.termination == Termination::max_iters &&
      prob.projected_grad_norm(x, g) <= cfg.grad_tol) {
    trace.termination = Termination::gradient;
  }

  out.argmin = x;
  out.loss = fx;
  return out;
}

}  // namespace capcrop
