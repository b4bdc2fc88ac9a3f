#pragma once
// Central finite-difference gradient checking.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ptaco/parameter.hpp"
#include "ptaco/rng.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco {

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Denominator floor of the relative error; entries whose true gradient is
  // below it are effectively compared in absolute terms.
  double floor = 1e-7;
  // 0 checks every entry; otherwise at most this many entries per parameter,
  // chosen with a fixed-seed generator.
  std::size_t max_entries = 0;
  std::uint64_t seed = 7;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = true;
  // Entry attaining max_rel_error.
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-7);

// Compares backward() of the scalar returned by `loss` against central
// differences for every listed parameter. Runs at high precision. Throws
// Error when two evaluations of `loss` disagree (non-deterministic loss).
GradCheckReport grad_check(const std::function<Tensor()>& loss, const std::vector<Parameter>& params,
                           const GradCheckOptions& options = {});

// Calls `draw` (which should re-randomize parameters and inputs) until one
// evaluation of `loss` keeps every relu/abs input at least `margin` away
// from 0, so central differences do not straddle a kink. Returns the number
// of draws; throws Error after `max_attempts`.
std::size_t draw_away_from_kinks(const std::function<void(Rng&)>& draw,
                                 const std::function<Tensor()>& loss, Rng& rng,
                                 double margin = 1e-3, std::size_t max_attempts = 500);

}  // namespace ptaco
