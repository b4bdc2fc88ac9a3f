#include "ptaco/error.hpp"
#include "ptaco/opcount.hpp"
#include "ptaco/ops.hpp"
#include "ptaco/simd/kernels.hpp"
#include "tensor_internal.hpp"

namespace ptaco {

namespace {

Tensor matmul_2d_rhs(const Tensor& a, const Tensor& b) {
  const std::size_t k = a.dim(-1);
  const std::size_t n = b.dim(1);
  const std::size_t rows = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(rows * n);
  simd::kernels().gemm(rows, n, k, a.values().data(), false, b.values().data(), false,
                       out.data(), false);
  opcount::add(static_cast<std::uint64_t>(rows) * n * k);
  return make_result(std::move(out_shape), std::move(out), "matmul", {a, b},
                     [rows, n, k](const Node& self) {
    const auto& kk = simd::kernels();
    const double* g = self.grad.data();
    if (double* ga = detail::parent_grad(self, 0)) {
      kk.gemm(rows, k, n, g, false, self.parents[1]->value.data(), true, ga, true);
    }
    if (double* gb = detail::parent_grad(self, 1)) {
      kk.gemm(k, n, rows, self.parents[0]->value.data(), true, g, false, gb, true);
    }
  });
}

Tensor matmul_batched(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(-2);
  const std::size_t k = a.dim(-1);
  const std::size_t n = b.dim(-1);
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch = broadcast_shapes(batch_a, batch_b);
  if (batch.empty()) batch = {1};
  const auto sa = detail::broadcast_strides(batch_a.empty() ? Shape{1} : batch_a, batch);
  const auto sb = detail::broadcast_strides(batch_b.empty() ? Shape{1} : batch_b, batch);

  // Matrix offsets per output batch entry.
  std::vector<std::size_t> offs_a, offs_b;
  detail::for_each_broadcast(batch, sa, sb, [&](std::size_t, std::size_t ia, std::size_t ib) {
    offs_a.push_back(ia * m * k);
    offs_b.push_back(ib * k * n);
  });
  const std::size_t count = offs_a.size();

  Shape out_shape = broadcast_shapes(batch_a, batch_b);
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(count * m * n);
  const auto& kk = simd::kernels();
  for (std::size_t e = 0; e < count; ++e) {
    kk.gemm(m, n, k, a.values().data() + offs_a[e], false, b.values().data() + offs_b[e], false,
            out.data() + e * m * n, false);
  }
  opcount::add(static_cast<std::uint64_t>(count) * m * n * k);
  return make_result(std::move(out_shape), std::move(out), "matmul", {a, b},
                     [m, n, k, offs_a, offs_b](const Node& self) {
    const auto& kk2 = simd::kernels();
    double* ga = detail::parent_grad(self, 0);
    double* gb = detail::parent_grad(self, 1);
    const double* av = self.parents[0]->value.data();
    const double* bv = self.parents[1]->value.data();
    for (std::size_t e = 0; e < offs_a.size(); ++e) {
      const double* g = self.grad.data() + e * m * n;
      if (ga) kk2.gemm(m, k, n, g, false, bv + offs_b[e], true, ga + offs_a[e], true);
      if (gb) kk2.gemm(k, n, m, av + offs_a[e], true, g, false, gb + offs_b[e], true);
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 1) {
    Shape s = a.shape();
    s.insert(s.begin(), 1);
    Tensor out = matmul(reshape(a, s), b);
    Shape os = out.shape();
    os.erase(os.end() - 2);
    return reshape(out, os);
  }
  if (b.rank() == 1) {
    Tensor out = matmul(a, reshape(b, {b.dim(0), 1}));
    Shape os = out.shape();
    os.pop_back();
    if (os.empty()) os = {1};
    return reshape(out, os);
  }
  if (a.dim(-1) != b.dim(-2)) {
    throw ShapeError("matmul inner extents differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  if (b.rank() == 2) return matmul_2d_rhs(a, b);
  return matmul_batched(a, b);
}

}  // namespace ptaco
