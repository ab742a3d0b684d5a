#pragma once

#include <functional>
#include <string>

#include "pshape/params.hpp"
#include "pshape/rng.hpp"
#include "pshape/tape.hpp"

namespace pshape {

// A loss expressed against tape-registered parameters. Must be deterministic
// given the parameter values.
using TapeLossFn = std::function<Tape::Var(Tape&, const Tape::NamedVars&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coords_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares reverse-mode gradients against central finite differences on a
// random subsample of at least min_coords coordinates (all, if the parameter
// count is smaller). Relative error uses max(1, |a|, |n|) as denominator.
GradCheckReport finite_diff_check(const TapeLossFn& loss_fn, const ParameterSet& params,
                                  double tolerance, Rng& rng, int64_t min_coords = 100,
                                  double step = 1e-5);

}  // namespace pshape
