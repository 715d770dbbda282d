#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graspforge/rng.hpp"

namespace gf {

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  int checks = 0;
  bool passed = false;
};

// Central finite difference of a scalar function of one coordinate.
double central_difference(const std::function<double(double)>& f, double x, double step = 1e-5);

// Runs every implemented loss (smooth L1, proposal, refinement, InfoNCE, and
// the encoder/head backprop) against central differences on `trials` random
// inputs each. Tolerance is relative: |a - n| / max(|a|, |n|, 1).
std::vector<GradCheckResult> run_gradient_checks(uint64_t seed, int trials = 100,
                                                 double tolerance = 1e-4);

}  // namespace gf
