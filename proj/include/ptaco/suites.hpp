#pragma once
// Gradient-check suites over every trainable module at tiny shapes
// (batch 2, 5 tokens, 12 frames, width 16).

#include <string>
#include <vector>

#include "ptaco/gradcheck.hpp"

namespace ptaco::suites {

struct SuiteResult {
  std::string module;
  GradCheckReport report;
  std::size_t draws = 0;  // parameter draws until no relu/abs input sat near a kink
  double seconds = 0.0;
};

// In run order.
const std::vector<std::string>& module_names();

// Throws ValueError for an unknown module name.
SuiteResult run(const std::string& module, const GradCheckOptions& options = {});

}  // namespace ptaco::suites
