#include <algorithm>
#include <numeric>

#include "ptaco/error.hpp"
#include "ptaco/ops.hpp"
#include "ptaco/simd/kernels.hpp"
#include "tensor_internal.hpp"

namespace ptaco {

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result(shape, std::move(out), "reshape", {x}, [](const Node& self) {
    if (double* gx = detail::parent_grad(self, 0)) {
      simd::kernels().axpy(self.grad.size(), 1.0, self.grad.data(), gx);
    }
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  std::vector<std::size_t> check(perm);
  std::sort(check.begin(), check.end());
  std::vector<std::size_t> expect(r);
  std::iota(expect.begin(), expect.end(), 0);
  if (perm.size() != r || check != expect) throw ShapeError("invalid permutation for " + shape_str(x.shape()));

  const Shape& in = x.shape();
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in[perm[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in[i + 1];
  // Source offset for each output element.
  std::vector<std::size_t> src_strides(r);
  for (std::size_t i = 0; i < r; ++i) src_strides[i] = in_strides[perm[i]];
  std::vector<std::size_t> zero(r, 0);
  std::vector<std::size_t> src(x.numel());
  detail::for_each_broadcast(out_shape, src_strides, zero,
                             [&](std::size_t i, std::size_t ia, std::size_t) { src[i] = ia; });
  const auto xv = x.values();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = xv[src[i]];
  return make_result(std::move(out_shape), std::move(out), "permute", {x},
                     [src = std::move(src)](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += self.grad[i];
  });
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw ShapeError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  const auto sx = detail::broadcast_strides(x.shape(), shape);
  std::vector<std::size_t> zero(shape.size(), 0);
  const auto xv = x.values();
  std::vector<double> out(shape_numel(shape));
  detail::for_each_broadcast(shape, sx, zero,
                             [&](std::size_t i, std::size_t ia, std::size_t) { out[i] = xv[ia]; });
  return make_result(shape, std::move(out), "broadcast_to", {x}, [shape, sx](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    std::vector<std::size_t> zero2(shape.size(), 0);
    detail::for_each_broadcast(shape, sx, zero2, [&](std::size_t i, std::size_t ia, std::size_t) {
      gx[ia] += self.grad[i];
    });
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t r = parts[0].rank();
  const std::size_t ax = detail::normalize_axis(axis, r);
  Shape out_shape = parts[0].shape();
  out_shape[ax] = 0;
  for (const Tensor& p : parts) {
    bool ok = p.rank() == r;
    for (std::size_t i = 0; ok && i < r; ++i) ok = i == ax || p.shape()[i] == parts[0].shape()[i];
    if (!ok) {
      throw ShapeError("concat shape mismatch: " + shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    }
    out_shape[ax] += p.shape()[ax];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= out_shape[i];
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < r; ++i) inner *= out_shape[i];
  const std::size_t out_row = out_shape[ax] * inner;

  std::vector<std::size_t> widths;  // per part, contiguous chunk per outer index
  for (const Tensor& p : parts) widths.push_back(p.shape()[ax] * inner);
  std::vector<double> out(outer * out_row);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].values().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * widths[k], widths[k], out.data() + o * out_row + col);
    }
    col += widths[k];
  }
  return make_result(std::move(out_shape), std::move(out), "concat", parts,
                     [outer, out_row, widths](const Node& self) {
    std::size_t c = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (double* g = detail::parent_grad(self, k)) {
        for (std::size_t o = 0; o < outer; ++o) {
          simd::kernels().axpy(widths[k], 1.0, self.grad.data() + o * out_row + c, g + o * widths[k]);
        }
      }
      c += widths[k];
    }
  });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = detail::normalize_axis(axis, x.rank());
  if (length == 0 || start + length > x.shape()[ax]) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for axis " + std::to_string(ax) + " of " +
                     shape_str(x.shape()));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= x.shape()[i];
  std::size_t inner = 1;
  for (std::size_t i = ax + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  const std::size_t in_row = x.shape()[ax] * inner;
  const std::size_t width = length * inner;
  const std::size_t offset = start * inner;
  Shape out_shape = x.shape();
  out_shape[ax] = length;
  std::vector<double> out(outer * width);
  const double* src = x.values().data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src + o * in_row + offset, width, out.data() + o * width);
  }
  return make_result(std::move(out_shape), std::move(out), "slice", {x},
                     [outer, in_row, width, offset](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o) {
      simd::kernels().axpy(width, 1.0, self.grad.data() + o * width, gx + o * in_row + offset);
    }
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids, const Shape& id_shape) {
  if (table.rank() != 2) throw ShapeError("embedding table must be [V,d], got " + shape_str(table.shape()));
  if (shape_numel(id_shape) != ids.size()) throw ShapeError("id count does not match id shape");
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ValueError("embedding id " + std::to_string(ids[i]) + " at index " +
                       std::to_string(i) + " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  std::vector<double> out(ids.size() * d);
  const double* tv = table.values().data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(tv + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Shape out_shape = id_shape;
  out_shape.push_back(d);
  std::vector<std::int64_t> saved(ids.begin(), ids.end());
  return make_result(std::move(out_shape), std::move(out), "embedding", {table},
                     [d, saved = std::move(saved)](const Node& self) {
    double* gt = detail::parent_grad(self, 0);
    if (!gt) return;
    for (std::size_t i = 0; i < saved.size(); ++i) {
      simd::kernels().axpy(d, 1.0, self.grad.data() + i * d, gt + static_cast<std::size_t>(saved[i]) * d);
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index, std::size_t frames) {
  if (x.rank() != 3) throw ShapeError("gather_rows expects [B,N,d], got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0);
  const std::size_t rows = x.dim(1);
  const std::size_t d = x.dim(2);
  if (index.size() != batch * frames) throw ShapeError("gather_rows index size mismatch");
  for (std::int64_t i : index) {
    if (i >= static_cast<std::int64_t>(rows)) throw ValueError("gather_rows index out of range");
  }
  std::vector<double> out(batch * frames * d, 0.0);
  const double* xv = x.values().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      const std::int64_t src = index[b * frames + t];
      if (src < 0) continue;
      std::copy_n(xv + (b * rows + static_cast<std::size_t>(src)) * d, d,
                  out.data() + (b * frames + t) * d);
    }
  }
  std::vector<std::int64_t> saved(index.begin(), index.end());
  return make_result({batch, frames, d}, std::move(out), "gather_rows", {x},
                     [batch, rows, frames, d, saved = std::move(saved)](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    if (!gx) return;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < frames; ++t) {
        const std::int64_t src = saved[b * frames + t];
        if (src < 0) continue;
        simd::kernels().axpy(d, 1.0, self.grad.data() + (b * frames + t) * d,
                             gx + (b * rows + static_cast<std::size_t>(src)) * d);
      }
    }
  });
}

}  // namespace ptaco
