#pragma once
// Shared helpers for the unit tests. The finite-difference routine here is a
// test-side oracle, deliberately separate from ptaco::grad_check.

#include <cmath>
#include <functional>
#include <vector>

#include "ptaco/ops.hpp"
#include "ptaco/parameter.hpp"
#include "ptaco/rng.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco::testing {

inline Tensor random_tensor(const Shape& shape, Rng& rng, bool requires_grad = false,
                            double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(shape, std::move(v), requires_grad);
}

// Entries [b, n, :] of a rank-3 tensor.
inline std::vector<double> row_values(const Tensor& x, std::size_t b, std::size_t n) {
  const std::size_t d = x.dim(2);
  const auto v = x.values();
  const auto start = static_cast<std::ptrdiff_t>((b * x.dim(1) + n) * d);
  return {v.begin() + start, v.begin() + start + static_cast<std::ptrdiff_t>(d)};
}

// Central differences of a scalar function with respect to every entry of x.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, Tensor x,
                                            double step = 1e-5) {
  auto values = x.mutable_values();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double plus = f();
    values[i] = saved - step;
    const double minus = f();
    values[i] = saved;
    grad[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Fixed random projection turning any tensor into a scalar with O(1)
// gradients everywhere: sum(x * w).
inline Tensor project_to_scalar(const Tensor& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  Tensor w = random_tensor(x.shape(), rng, false, -1.0, 1.0);
  return sum(mul(x, w));
}

// Overwrites every parameter with uniform noise so zero-initialized kernels
// and unit gains do not hide gradient errors.
inline void randomize(ParameterStore& store, Rng& rng, double spread = 0.5) {
  for (Parameter& p : store.parameters()) {
    for (double& v : p.tensor.mutable_values()) v = rng.uniform(-spread, spread);
  }
}

}  // namespace ptaco::testing
