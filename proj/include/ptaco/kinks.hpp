#pragma once
// Distance of piecewise-linear op inputs (relu, abs) from their kink at 0.
// Finite differences are only meaningful when every such input stays further
// from 0 than the perturbation moves it; gradient-check suites use this to
// reject draws that straddle a kink.

namespace ptaco::kinks {

// Starts recording; the running minimum resets to +inf.
void start();
// Stops recording and returns the smallest |input| seen since start().
double stop();
// Called by the ops themselves. Exact zeros are skipped: they come from
// masked positions whose value no parameter perturbation changes.
void observe(double x);
bool recording();

}  // namespace ptaco::kinks
