#pragma once
// Helpers shared by the op implementations.

#include <cstddef>
#include <string>
#include <vector>

#include "ptaco/error.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco::detail {

// Strides of `in` expressed in the index space of `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out);

// Calls f(flat_out, offset_a, offset_b) for every element of `out`, in
// row-major order.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t r = out.size();
  const std::size_t total = shape_numel(out);
  if (total == 0) return;
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = out[r - 1];
  const std::size_t ia_step = sa[r - 1];
  const std::size_t ib_step = sb[r - 1];
  std::vector<std::size_t> counter(r, 0);
  std::size_t base_a = 0;
  std::size_t base_b = 0;
  for (std::size_t i = 0; i < total; i += inner) {
    std::size_t ia = base_a;
    std::size_t ib = base_b;
    for (std::size_t j = 0; j < inner; ++j, ia += ia_step, ib += ib_step) f(i + j, ia, ib);
    // Advance the outer counters (axes r-2 .. 0).
    for (std::size_t axis = r - 1; axis-- > 0;) {
      ++counter[axis];
      base_a += sa[axis];
      base_b += sb[axis];
      if (counter[axis] < out[axis]) break;
      base_a -= sa[axis] * out[axis];
      base_b -= sb[axis] * out[axis];
      counter[axis] = 0;
    }
  }
}

// Accumulation target for parent `i`, or nullptr when it needs no gradient.
inline double* parent_grad(const Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

inline std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

}  // namespace ptaco::detail
