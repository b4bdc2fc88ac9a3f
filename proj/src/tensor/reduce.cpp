#include <algorithm>
#include <cmath>

#include "ptaco/error.hpp"
#include "ptaco/ops.hpp"
#include "ptaco/simd/kernels.hpp"
#include "tensor_internal.hpp"

namespace ptaco {

namespace {

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = detail::normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = xv[base];
      for (std::size_t e = 1; e < s.extent; ++e) mx = std::max(mx, xv[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(xv[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  return make_result(x.shape(), std::move(out), "softmax", {x}, [s](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    const double* y = self.value.data();
    const double* g = self.grad.data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          dot += g[base + e * s.inner] * y[base + e * s.inner];
        }
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t idx = base + e * s.inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d) {
    throw ShapeError("layer_norm gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " do not match last axis of " +
                     shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> out(xv.size());
  // Saved per row for backward: normalized values and 1/std.
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (row[c] - mu) * is;
      xhat[r * d + c] = h;
      out[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                     [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    double* gg = detail::parent_grad(self, 1);
    double* gb = detail::parent_grad(self, 2);
    const double* gain_v = self.parents[1]->value.data();
    const double* g = self.grad.data();
    const double dn = static_cast<double>(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* grow = g + r * d;
      const double* hrow = xhat.data() + r * d;
      if (gg) {
        for (std::size_t c = 0; c < d; ++c) gg[c] += grow[c] * hrow[c];
      }
      if (gb) {
        for (std::size_t c = 0; c < d; ++c) gb[c] += grow[c];
      }
      if (gx) {
        double sum_dh = 0.0;
        double sum_dh_h = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double dh = grow[c] * gain_v[c];
          sum_dh += dh;
          sum_dh_h += dh * hrow[c];
        }
        for (std::size_t c = 0; c < d; ++c) {
          const double dh = grow[c] * gain_v[c];
          gx[r * d + c] += inv_std[r] * (dh - sum_dh / dn - hrow[c] * sum_dh_h / dn);
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  const double total = simd::kernels().sum(x.numel(), x.values().data());
  return make_result({1}, {total}, "sum", {x}, [](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Tensor sum(const Tensor& x, int axis, bool keepdim) {
  const std::size_t ax = detail::normalize_axis(axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  const auto xv = x.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = xv.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
    if (out_shape.empty()) out_shape = {1};
  }
  return make_result(std::move(out_shape), std::move(out), "sum_axis", {x}, [s](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        double* dst = gx + (o * s.extent + e) * s.inner;
        const double* g = self.grad.data() + o * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
      }
    }
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace ptaco
