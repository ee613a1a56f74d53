#pragma once

#include <iosfwd>
#include <vector>

#include "capcrop/pipeline.hpp"

namespace capcrop {

struct IterationTiming {
  int index = 0;  // position in the annealing schedule
  double scale = 1.0;
  double seconds = 0.0;
  long scorer_calls = 0;
};

// Wall time of `iterations` outer iterations (K restarts + aggregation each),
// taken at evenly spaced positions of the schedule from its first to its last
// scale and started from the image center. The s = 1 iteration has a
// single-point feasible box, so timing only the leading iterations would
// understate the cost.
std::vector<IterationTiming> time_outer_iterations(const Pyramid& pyr, const CaptionBag& user,
                                                   Scorer& scorer, const RunConfig& cfg,
                                                   int iterations);

// Whitespace-aligned table with a fixed header line.
void write_timing_table(const std::vector<IterationTiming>& rows, std::ostream& out);

}  // namespace capcrop
