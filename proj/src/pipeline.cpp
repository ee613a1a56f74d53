#include "capcrop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace capcrop {

void RunConfig::validate() const {
  if (!(anneal_factor > 0.0 && anneal_factor < 1.0)) {
    throw std::invalid_argument("anneal_factor must lie in (0, 1)");
  }
  if (!(min_scale > 0.0 && min_scale < 1.0)) {
    throw std::invalid_argument("min_scale must lie in (0, 1)");
  }
  if (restarts < 1) {
    throw std::invalid_argument("restarts must be >= 1");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("noise_sigma must be >= 0");
  }
  if (!(fd_step > 0.0)) {
    throw std::invalid_argument("fd_step must be > 0");
  }
  if (out_size < 2) {
    throw std::invalid_argument("out_size must be >= 2");
  }
  if (max_iterations < 0) {
    throw std::invalid_argument("max_iterations must be >= 0");
  }
  solver.validate();
}

double anneal_scale(int i, double factor) {
  if (i < 0) {
    throw std::invalid_argument("anneal_scale: negative iteration");
  }
  return std::pow(factor, i);
}

std::vector<double> scale_schedule(const RunConfig& cfg) {
  std::vector<double> out;
  for (int i = 0;; ++i) {
    if (cfg.max_iterations > 0 && i >= cfg.max_iterations) {
      break;
    }
    const double s = anneal_scale(i, cfg.anneal_factor);
    if (s < cfg.min_scale) {
      break;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

Point clip_point(Point p, double scale) {
  const auto c = clip_params({p[0], p[1], scale});
  return {c.x, c.y};
}

// Serializes observer callbacks coming from concurrent restarts.
class Observer {
 public:
  explicit Observer(const RunConfig& cfg) : cb_(cfg.on_evaluate) {}
  void operator()(const CropParams& theta) {
    if (cb_) {
      std::lock_guard lock(mu_);
      cb_(theta);
    }
  }

 private:
  const std::function<void(const CropParams&)>& cb_;
  std::mutex mu_;
};

RestartOutcome solve_from(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                          double scale, Point start, const RunConfig& cfg,
                          Observer& notify) {
  const bool analytic = scorer.provides_gradients();
  const auto value = [&](const CropParams& theta, bool grad) {
    notify(theta);
    return loss_at(pyr, theta, user, scorer, cfg.lambda, cfg.out_size,
                   grad ? Derivatives::position : Derivatives::none);
  };
  const Objective objective = [&](std::span<const double> xy, std::span<double> grad) {
    const CropParams theta{xy[0], xy[1], scale};
    if (analytic) {
      const LossReport r = value(theta, true);
      grad[0] = r.grad_theta[0];
      grad[1] = r.grad_theta[1];
      return r.total;
    }
    const double f = value(theta, false).total;
    for (int k = 0; k < 2; ++k) {
      CropParams hi = theta;
      CropParams lo = theta;
      (k == 0 ? hi.x : hi.y) += cfg.fd_step;
      (k == 0 ? lo.x : lo.y) -= cfg.fd_step;
      hi = clip_params(hi);
      lo = clip_params(lo);
      const double span = k == 0 ? hi.x - lo.x : hi.y - lo.y;
      if (span <= 0.0) {
        grad[k] = 0.0;
        continue;
      }
      grad[k] = (value(hi, false).total - value(lo, false).total) / span;
    }
    return f;
  };

  const double bound = 1.0 - scale;
  const Point x0 = clip_point(start, scale);
  SolveResult res = lbfgs_minimize(objective, {x0[0], x0[1]},
                                   Bounds::uniform(2, -bound, bound), cfg.solver);
  return {{res.argmin[0], res.argmin[1]}, res.loss, std::move(res.trace)};
}

}  // namespace

Point perturb(Point center, double scale, double sigma, NoiseKind kind,
              std::mt19937_64& rng) {
  if (sigma < 0.0) {
    throw std::invalid_argument("perturb: sigma must be >= 0");
  }
  if (sigma > 0.0) {
    if (kind == NoiseKind::gaussian) {
      std::normal_distribution<double> noise(0.0, sigma);
      center[0] += noise(rng);
      center[1] += noise(rng);
    } else {
      std::uniform_real_distribution<double> noise(-sigma, sigma);
      center[0] += noise(rng);
      center[1] += noise(rng);
    }
  }
  return clip_point(center, scale);
}

RestartOutcome restart_solve(const Pyramid& pyr, const CaptionBag& user,
                             Scorer& scorer, double scale, Point start,
                             const RunConfig& cfg) {
  Observer notify(cfg);
  return solve_from(pyr, user, scorer, scale, start, cfg, notify);
}

Point mean_point(std::span<const Point> optima) {
  if (optima.empty()) {
    throw std::invalid_argument("aggregate of zero restarts");
  }
  std::vector<Point> sorted(optima.begin(), optima.end());
  std::sort(sorted.begin(), sorted.end());
  Point sum{0.0, 0.0};
  for (const auto& p : sorted) {
    sum[0] += p[0];
    sum[1] += p[1];
  }
  const double k = static_cast<double>(sorted.size());
  return {sum[0] / k, sum[1] / k};
}

Point aggregate_restarts(std::span<const Point> optima, double next_scale) {
  return clip_point(mean_point(optima), next_scale);
}

ScaleRecord run_scale(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
                      double scale, double next_scale, std::span<const Point> starts,
                      const RunConfig& cfg) {
  Observer notify(cfg);
  const int k = static_cast<int>(starts.size());
  std::vector<RestartOutcome> outcomes(k);
  std::vector<std::exception_ptr> errors(k);

#pragma omp parallel for schedule(dynamic) if (scorer.concurrent_safe())
  for (int r = 0; r < k; ++r) {
    try {
      outcomes[r] = solve_from(pyr, user, scorer, scale, starts[r], cfg, notify);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }

  ScaleRecord rec;
  rec.scale = scale;
  std::vector<Point> optima;
  optima.reserve(k);
  for (int r = 0; r < k; ++r) {
    const auto& o = outcomes[r];
    rec.restarts.push_back({clip_point(starts[r], scale), o.optimum, o.loss,
                            o.trace.termination, o.trace.evaluations});
    optima.push_back(o.optimum);
  }
  rec.mean = mean_point(optima);
  const CropParams at_mean{rec.mean[0], rec.mean[1], scale};
  notify(at_mean);
  rec.mean_loss =
      loss_at(pyr, at_mean, user, scorer, cfg.lambda, cfg.out_size, Derivatives::none).total;
  rec.next_center = clip_point(rec.mean, next_scale);
  return rec;
}

CropRun run(const Pyramid& pyr, const CaptionBag& user, Scorer& scorer,
            const RunConfig& cfg) {
  cfg.validate();
  if (scorer.input_size() != 0 && scorer.input_size() != cfg.out_size) {
    throw std::invalid_argument("out_size " + std::to_string(cfg.out_size) +
                                " does not match the scorer input size " +
                                std::to_string(scorer.input_size()));
  }
  std::mt19937_64 rng(cfg.rng_seed);
  CropRun out;
  out.best_loss = std::numeric_limits<double>::infinity();
  Point center{0.0, 0.0};
  const auto schedule = scale_schedule(cfg);
  try {
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const double scale = schedule[i];
      center = clip_point(center, scale);
      std::vector<Point> starts(cfg.restarts);
      for (auto& s : starts) {
        s = perturb(center, scale, cfg.noise_sigma, cfg.noise_kind, rng);
      }
      const double next = anneal_scale(static_cast<int>(i) + 1, cfg.anneal_factor);
      ScaleRecord rec = run_scale(pyr, user, scorer, scale, next, starts, cfg);

      for (const auto& r : rec.restarts) {
        if (r.loss < out.best_loss) {
          out.best_loss = r.loss;
          out.best_theta = {r.optimum[0], r.optimum[1], scale};
        }
      }
      if (rec.mean_loss < out.best_loss) {
        out.best_loss = rec.mean_loss;
        out.best_theta = {rec.mean[0], rec.mean[1], scale};
      }
      rec.best_loss = out.best_loss;
      center = rec.next_center;
      out.per_scale.push_back(std::move(rec));
      ++out.iterations_run;
    }
  } catch (const Error& e) {
    throw PipelineError(e.what(), std::move(out));
  }
  return out;
}

CropRun run(const Image& image, std::string_view caption, const Vocabulary& vocab,
            Scorer& scorer, const RunConfig& cfg) {
  const CaptionBag user = bag_from_text(caption, vocab);
  const Pyramid pyr = build_pyramid(image, cfg.scale_set, cfg.blur);
  return run(pyr, user, scorer, cfg);
}

void write_trace(const CropRun& run, std::ostream& out) {
  using nlohmann::json;
  for (const auto& rec : run.per_scale) {
    for (std::size_t k = 0; k < rec.restarts.size(); ++k) {
      const auto& r = rec.restarts[k];
      json j = {{"kind", "restart"},
                {"scale", rec.scale},
                {"index", k},
                {"start", r.start},
                {"optimum", r.optimum},
                {"loss", r.loss},
                {"termination", to_string(r.termination)},
                {"evaluations", r.evaluations}};
      out << j.dump() << '\n';
    }
    json agg = {{"kind", "aggregate"},       {"scale", rec.scale},
                {"mean", rec.mean},          {"mean_loss", rec.mean_loss},
                {"next_center", rec.next_center}, {"best_loss", rec.best_loss}};
    out << agg.dump() << '\n';
  }
  json best = {{"kind", "best"},
               {"theta", {run.best_theta.x, run.best_theta.y, run.best_theta.s}},
               {"loss", run.best_loss},
               {"iterations", run.iterations_run}};
  out << best.dump() << '\n';
}

}  // namespace capcrop
