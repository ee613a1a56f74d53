// capcrop command line: crop, landscape, gradcheck, bench, fixtures, vocab.
//
// Exit status: 0 success, 1 usage error, 2 runtime or scorer error (including
// a failed gradient check).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "capcrop/bag_fixtures.hpp"
#include "capcrop/error.hpp"
#include "capcrop/gradcheck.hpp"
#include "capcrop/image_io.hpp"
#include "capcrop/landscape.hpp"
#include "capcrop/pipeline.hpp"
#include "capcrop/remote_scorer.hpp"
#include "capcrop/runtime.hpp"
#include "capcrop/synthetic.hpp"
#include "capcrop/testimages.hpp"
#include "capcrop/timing.hpp"

namespace fs = std::filesystem;
using namespace capcrop;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScorerOptions {
  std::string spec = "builtin";
  std::string vocab_path;
  double timeout = 30.0;
};

struct InputOptions {
  std::string image;
  std::string caption;
  double lambda = 0.01;
  int out_size = kDefaultOutSize;
  std::vector<double> pyramid{0.25, 1.0 / 3.0, 0.5, 1.0};
  std::string out_dir = ".";
};

void add_scorer_flags(CLI::App* cmd, ScorerOptions& s) {
  cmd->add_option("--scorer", s.spec,
                  "builtin[:k=v,...], blob, blob-thirds, constant, echo, cmd:<command> or "
                  "tcp:<host>:<port>")
      ->capture_default_str();
  cmd->add_option("--vocab", s.vocab_path, "vocabulary file (one token per line)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--timeout", s.timeout, "per-request timeout for remote scorers, seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void add_input_flags(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("image", in.image, "input image (PNG, PPM or PGM)")->required();
  cmd->add_option("--caption", in.caption, "user caption")->required();
  cmd->add_option("--lambda", in.lambda, "aesthetic weight")->capture_default_str();
  cmd->add_option("--out-size", in.out_size, "side of the sampled crop fed to the scorer")
      ->capture_default_str()
      ->check(CLI::Range(2, 4096));
  cmd->add_option("--pyramid", in.pyramid, "pyramid scale set")->delimiter(',');
  cmd->add_option("--out-dir", in.out_dir, "directory for output files")->capture_default_str();
}

Vocabulary load_vocab(const ScorerOptions& s) {
  return s.vocab_path.empty() ? default_vocabulary() : Vocabulary::load(s.vocab_path);
}

std::shared_ptr<Scorer> open_scorer(const ScorerOptions& s, const Vocabulary& vocab) {
  if (s.spec.rfind("cmd:", 0) == 0 || s.spec.rfind("tcp:", 0) == 0) {
    ConnectOptions opts;
    opts.timeout = std::chrono::milliseconds(static_cast<long>(s.timeout * 1000.0));
    return connect_scorer(s.spec, vocab, opts);
  }
  try {
    return make_builtin_scorer(s.spec, vocab.size());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--scorer: ") + e.what());
  }
}

CaptionBag caption_bag(const std::string& caption, const Vocabulary& vocab) {
  if (caption.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw UsageError("--caption is empty");
  }
  try {
    return bag_from_text(caption, vocab);
  } catch (const EmptyCaptionError& e) {
    throw UsageError(e.what());
  }
}

void check_scale(double s, const char* what) {
  if (!(s > 0.0 && s <= 1.0)) {
    throw UsageError(std::string(what) + " values must lie in (0, 1]");
  }
}

fs::path output_path(const InputOptions& in, const std::string& suffix) {
  fs::create_directories(in.out_dir);
  return fs::path(in.out_dir) / (fs::path(in.image).stem().string() + suffix);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

Image extract_box(const Image& img, const PixelBox& box) {
  Image out(box.height(), box.width(), img.channels());
  for (int y = 0; y < box.height(); ++y) {
    for (int x = 0; x < box.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = img.at(box.y0 + y, box.x0 + x, c);
      }
    }
  }
  return out;
}

// RGB copy of img with the box outline (its outermost pixel ring) in red.
Image draw_overlay(const Image& img, const PixelBox& box) {
  Image out(img.height(), img.width(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = img.at(y, x, img.channels() == 3 ? c : 0);
      }
    }
  }
  const auto paint = [&](int y, int x) {
    out.at(y, x, 0) = 1.0;
    out.at(y, x, 1) = 0.0;
    out.at(y, x, 2) = 0.0;
  };
  for (int x = box.x0; x < box.x1; ++x) {
    paint(box.y0, x);
    paint(box.y1 - 1, x);
  }
  for (int y = box.y0; y < box.y1; ++y) {
    paint(y, box.x0);
    paint(y, box.x1 - 1);
  }
  return out;
}

// --- crop ------------------------------------------------------------------

struct CropOptions {
  InputOptions in;
  ScorerOptions scorer;
  RunConfig cfg;
  std::string noise = "gaussian";
};

int cmd_crop(const CropOptions& o) {
  RunConfig cfg = o.cfg;
  cfg.lambda = o.in.lambda;
  cfg.out_size = o.in.out_size;
  cfg.scale_set = o.in.pyramid;
  cfg.noise_kind = o.noise == "uniform" ? NoiseKind::uniform : NoiseKind::gaussian;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Vocabulary vocab = load_vocab(o.scorer);
  const CaptionBag bag = caption_bag(o.in.caption, vocab);
  if (bag.dropped > 0) {
    std::cerr << "warning: " << bag.dropped << " caption word(s) not in the vocabulary\n";
  }
  const Image img = load_image(o.in.image);
  auto scorer = open_scorer(o.scorer, vocab);

  const Pyramid pyr = build_pyramid(img, cfg.scale_set, cfg.blur);
  CropRun result;
  try {
    result = run(pyr, bag, *scorer, cfg);
  } catch (const PipelineError& e) {
    std::ostringstream trace;
    write_trace(e.partial(), trace);
    write_text(output_path(o.in, ".trace.txt"), trace.str());
    throw;
  }

  const PixelBox box = theta_to_pixel_box(result.best_theta, img.width(), img.height());
  std::ostringstream trace;
  write_trace(result, trace);

  const LossReport terms =
      loss_at(pyr, result.best_theta, bag, *scorer, cfg.lambda, cfg.out_size, Derivatives::none);

  nlohmann::ordered_json side;
  side["image"] = o.in.image;
  side["caption"] = o.in.caption;
  side["scorer"] = o.scorer.spec;
  side["seed"] = cfg.rng_seed;
  side["lambda"] = cfg.lambda;
  side["theta"] = {{"x", result.best_theta.x}, {"y", result.best_theta.y},
                   {"s", result.best_theta.s}};
  side["loss"] = result.best_loss;
  side["caption_term"] = terms.caption_term;
  side["aesthetic_term"] = terms.aesthetic_term;
  side["box"] = {box.x0, box.y0, box.x1, box.y1};
  side["image_size"] = {img.width(), img.height()};
  side["iterations"] = result.iterations_run;

  // All files are written only after the run succeeded.
  save_image(extract_box(img, box), output_path(o.in, ".crop.png"));
  save_image(draw_overlay(img, box), output_path(o.in, ".overlay.png"));
  write_text(output_path(o.in, ".trace.txt"), trace.str());
  write_text(output_path(o.in, ".crop.json"), side.dump(2) + "\n");

  std::printf("theta %.6f %.6f %.6f\nloss %.9g\nbox %d %d %d %d\n", result.best_theta.x,
              result.best_theta.y, result.best_theta.s, result.best_loss, box.x0, box.y0, box.x1,
              box.y1);
  return 0;
}

// --- landscape -------------------------------------------------------------

struct LandscapeOptions {
  InputOptions in;
  ScorerOptions scorer;
  std::vector<double> scales{0.5};
  int grid = 21;
  int cell_px = 8;
};

int cmd_landscape(const LandscapeOptions& o) {
  if (o.grid < 3) {
    throw UsageError("--grid must be at least 3");
  }
  for (double s : o.scales) {
    check_scale(s, "--scales");
  }
  for (double s : o.in.pyramid) {
    check_scale(s, "--pyramid");
  }
  const Vocabulary vocab = load_vocab(o.scorer);
  const CaptionBag bag = caption_bag(o.in.caption, vocab);
  const Image img = load_image(o.in.image);
  auto scorer = open_scorer(o.scorer, vocab);
  const Pyramid pyr = build_pyramid(img, o.in.pyramid, BlurPolicy{});

  std::vector<Landscape> lands;
  for (double s : o.scales) {
    lands.push_back(compute_landscape(pyr, bag, *scorer, o.in.lambda, o.in.out_size, s, o.grid));
  }
  for (const auto& land : lands) {
    const std::string tag = ".landscape." + format_sig9(land.scale);
    std::ostringstream csv;
    write_landscape_csv(land, csv);
    write_text(output_path(o.in, tag + ".csv"), csv.str());
    save_image(landscape_heatmap(land, o.cell_px), output_path(o.in, tag + ".png"));
    const auto best = std::min_element(
        land.cells.begin(), land.cells.end(), [](const LandscapeCell& a, const LandscapeCell& b) {
          return a.report.total < b.report.total;
        });
    std::printf("scale %s min %.9g at %.6f %.6f\n", format_sig9(land.scale).c_str(),
                best->report.total, best->x, best->y);
  }
  return 0;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckCli {
  GradcheckOptions opts;
  double tolerance = 1e-3;
};

int cmd_gradcheck(const GradcheckCli& o) {
  if (o.opts.trials < 1) {
    throw UsageError("--trials must be >= 1");
  }
  const GradcheckReport rep = run_gradcheck(o.opts);
  const auto worst = std::max_element(
      rep.cases.begin(), rep.cases.end(),
      [](const GradcheckCase& a, const GradcheckCase& b) { return a.rel_error < b.rel_error; });
  std::printf("trials %d seed %llu out_size %d fd_step %.3g\n", o.opts.trials,
              static_cast<unsigned long long>(o.opts.seed), o.opts.out_size, o.opts.fd_step);
  std::printf("worst trial %td image %dx%dx%d theta %.6f %.6f %.6f\n", worst - rep.cases.begin(),
              worst->height, worst->width, worst->channels, worst->theta.x, worst->theta.y,
              worst->theta.s);
  std::printf("  analytic %.9e %.9e\n  numeric  %.9e %.9e\n", worst->analytic[0],
              worst->analytic[1], worst->numeric[0], worst->numeric[1]);
  std::printf("max_rel_error %.6e\n", rep.max_rel_error);
  const bool ok = rep.max_rel_error < o.tolerance;
  std::printf("%s (tolerance %.3g)\n", ok ? "PASS" : "FAIL", o.tolerance);
  return ok ? 0 : kExitRuntime;
}

// --- bench -----------------------------------------------------------------

struct BenchOptions {
  ScorerOptions scorer;
  std::string caption = "a dog on the grass";
  int size = 256;
  int iters = 5;
  RunConfig cfg;
};

int cmd_bench(const BenchOptions& o) {
  if (o.iters < 0) {
    throw UsageError("--iters must be >= 0");
  }
  const Vocabulary vocab = load_vocab(o.scorer);
  const CaptionBag bag = caption_bag(o.caption, vocab);
  auto scorer = open_scorer(o.scorer, vocab);
  const Image img = random_smooth_image(o.size, o.size, 3, 4.0, o.cfg.rng_seed);
  const Pyramid pyr = build_pyramid(img, o.cfg.scale_set, o.cfg.blur);
  const auto rows = time_outer_iterations(pyr, bag, *scorer, o.cfg, o.iters);
  std::printf("image %dx%d restarts %d out_size %d\n", o.size, o.size, o.cfg.restarts,
              o.cfg.out_size);
  std::ostringstream table;
  write_timing_table(rows, table);
  std::fputs(table.str().c_str(), stdout);
  return 0;
}

// --- fixtures --------------------------------------------------------------

int cmd_fixtures(const std::string& out_path, int count, std::uint64_t seed, int vocab_size) {
  if (count < 0 || vocab_size < 2) {
    throw UsageError("--count must be >= 0 and --vocab-size >= 2");
  }
  const std::string text = bag_loss_fixtures(count, seed, vocab_size);
  if (out_path.empty() || out_path == "-") {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text(out_path, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Caption-driven crop search by scale-annealed multi-restart L-BFGS"};
  app.require_subcommand(1);
  std::function<int()> action;

  CropOptions crop;
  auto* c = app.add_subcommand("crop", "find the best crop for a caption");
  add_input_flags(c, crop.in);
  add_scorer_flags(c, crop.scorer);
  c->add_option("--seed", crop.cfg.rng_seed, "restart noise seed")->capture_default_str();
  c->add_option("--restarts", crop.cfg.restarts, "restarts per scale (K)")->capture_default_str();
  c->add_option("--sigma", crop.cfg.noise_sigma, "restart noise scale")->capture_default_str();
  c->add_option("--noise", crop.noise, "restart noise law")
      ->check(CLI::IsMember({"gaussian", "uniform"}))
      ->capture_default_str();
  c->add_option("--anneal", crop.cfg.anneal_factor, "scale factor per outer iteration")
      ->capture_default_str();
  c->add_option("--min-scale", crop.cfg.min_scale, "stop below this scale")->capture_default_str();
  c->add_option("--max-iterations", crop.cfg.max_iterations, "outer iteration cap (0: none)")
      ->capture_default_str();
  c->add_option("--fd-step", crop.cfg.fd_step, "finite-difference step for gradient-free scorers")
      ->capture_default_str();
  c->callback([&] { action = [&] { return cmd_crop(crop); }; });

  LandscapeOptions land;
  auto* l = app.add_subcommand("landscape", "total loss over a grid of crop centers");
  add_input_flags(l, land.in);
  add_scorer_flags(l, land.scorer);
  l->add_option("--scales", land.scales, "crop scales to evaluate")->delimiter(',');
  l->add_option("--grid", land.grid, "grid points per axis")->capture_default_str();
  l->add_option("--cell-px", land.cell_px, "heatmap pixels per grid cell")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  l->callback([&] { action = [&] { return cmd_landscape(land); }; });

  GradcheckCli grad;
  auto* g = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  g->add_option("--trials", grad.opts.trials, "random instances")->capture_default_str();
  g->add_option("--seed", grad.opts.seed, "instance seed")->capture_default_str();
  g->add_option("--out-size", grad.opts.out_size, "crop side")
      ->capture_default_str()
      ->check(CLI::Range(2, 4096));
  g->add_option("--fd-step", grad.opts.fd_step, "central difference step")->capture_default_str();
  g->add_option("--tolerance", grad.tolerance, "maximum relative error")->capture_default_str();
  g->add_flag("--corrupt-jacobian", grad.opts.corrupt_jacobian,
              "negative control: perturb the sampler jacobian");
  g->callback([&] { action = [&] { return cmd_gradcheck(grad); }; });

  BenchOptions bench;
  auto* b = app.add_subcommand("bench", "time outer iterations");
  add_scorer_flags(b, bench.scorer);
  b->add_option("--caption", bench.caption, "caption")->capture_default_str();
  b->add_option("--size", bench.size, "synthetic image side")
      ->capture_default_str()
      ->check(CLI::Range(8, 8192));
  b->add_option("--iters", bench.iters, "outer iterations to time")->capture_default_str();
  b->add_option("--restarts", bench.cfg.restarts, "restarts per iteration")->capture_default_str();
  b->add_option("--out-size", bench.cfg.out_size, "crop side")
      ->capture_default_str()
      ->check(CLI::Range(2, 4096));
  b->add_option("--seed", bench.cfg.rng_seed, "image and noise seed")->capture_default_str();
  b->callback([&] { action = [&] { return cmd_bench(bench); }; });

  std::string fix_out;
  int fix_count = 64;
  std::uint64_t fix_seed = 7;
  int fix_vocab = 8;
  auto* f = app.add_subcommand("fixtures", "write caption-loss fixtures (JSON lines)");
  f->add_option("--out", fix_out, "output file ('-' for stdout)");
  f->add_option("--count", fix_count, "number of fixtures")->capture_default_str();
  f->add_option("--seed", fix_seed, "generator seed")->capture_default_str();
  f->add_option("--vocab-size", fix_vocab, "distribution length")->capture_default_str();
  f->callback([&] {
    action = [&] { return cmd_fixtures(fix_out, fix_count, fix_seed, fix_vocab); };
  });

  std::string vocab_out;
  auto* v = app.add_subcommand("vocab", "write the built-in vocabulary file");
  v->add_option("--out", vocab_out, "output file (default stdout)");
  v->callback([&] {
    action = [&] {
      const std::string text = default_vocabulary().serialize();
      if (vocab_out.empty()) {
        std::fputs(text.c_str(), stdout);
      } else {
        write_text(vocab_out, text);
      }
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
