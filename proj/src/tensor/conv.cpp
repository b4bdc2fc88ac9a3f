#include <cmath>

#include "ptaco/error.hpp"
#include "ptaco/opcount.hpp"
#include "ptaco/ops.hpp"
#include "ptaco/simd/kernels.hpp"
#include "tensor_internal.hpp"

namespace ptaco {

namespace {

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t rows, std::size_t cols) {
  std::vector<double> w(rows * cols);
  for (std::size_t h = 0; h < rows; ++h) {
    const double* l = logits.data() + h * cols;
    double mx = l[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, l[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += (w[h * cols + j] = std::exp(l[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) w[h * cols + j] /= total;
  }
  return w;
}

}  // namespace

Tensor lightweight_conv(const Tensor& x, const Tensor& logits, std::span<const double> mask,
                        bool causal) {
  if (x.rank() != 3) throw ShapeError("lightweight_conv expects [B,T,d], got " + shape_str(x.shape()));
  if (logits.rank() != 2) throw ShapeError("lightweight_conv kernel must be [H,k]");
  const std::size_t batch = x.dim(0);
  const std::size_t frames = x.dim(1);
  const std::size_t d = x.dim(2);
  const std::size_t heads = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (d % heads != 0) {
    throw ShapeError("lightweight_conv: " + std::to_string(heads) + " heads do not divide " +
                     std::to_string(d) + " channels");
  }
  if (k % 2 == 0) throw ShapeError("lightweight_conv kernel width must be odd");
  if (!mask.empty() && mask.size() != batch * frames) throw ShapeError("lightweight_conv mask size mismatch");
  const std::size_t dh = d / heads;
  // Tap j reads frame t + j - offset.
  const std::size_t offset = causal ? k - 1 : (k - 1) / 2;
  std::vector<double> valid(batch * frames, 1.0);
  if (!mask.empty()) valid.assign(mask.begin(), mask.end());

  const std::vector<double> w = softmax_rows(logits.values(), heads, k);
  const double* xv = x.values().data();
  std::vector<double> out(batch * frames * d, 0.0);
  const auto& kk = simd::kernels();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < frames; ++t) {
      if (valid[b * frames + t] == 0.0) continue;
      double* orow = out.data() + (b * frames + t) * d;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(offset);
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
        const std::size_t src = b * frames + static_cast<std::size_t>(s);
        if (valid[src] == 0.0) continue;
        const double* xrow = xv + src * d;
        for (std::size_t h = 0; h < heads; ++h) kk.axpy(dh, w[h * k + j], xrow + h * dh, orow + h * dh);
      }
    }
  }
  opcount::add(static_cast<std::uint64_t>(batch) * frames * d * k);

  return make_result(x.shape(), std::move(out), "lightweight_conv", {x, logits},
                     [batch, frames, d, heads, k, dh, offset, w, valid = std::move(valid)](const Node& self) {
    double* gx = detail::parent_grad(self, 0);
    double* gl = detail::parent_grad(self, 1);
    const auto& kk2 = simd::kernels();
    const double* xv2 = self.parents[0]->value.data();
    const double* g = self.grad.data();
    std::vector<double> gw(heads * k, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < frames; ++t) {
        if (valid[b * frames + t] == 0.0) continue;
        const double* grow = g + (b * frames + t) * d;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(offset);
          if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
          const std::size_t src = b * frames + static_cast<std::size_t>(s);
          if (valid[src] == 0.0) continue;
          for (std::size_t h = 0; h < heads; ++h) {
            if (gx) kk2.axpy(dh, w[h * k + j], grow + h * dh, gx + src * d + h * dh);
            if (gl) gw[h * k + j] += kk2.dot(dh, grow + h * dh, xv2 + src * d + h * dh);
          }
        }
      }
    }
    if (gl) {
      for (std::size_t h = 0; h < heads; ++h) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += gw[h * k + j] * w[h * k + j];
        for (std::size_t j = 0; j < k; ++j) gl[h * k + j] += w[h * k + j] * (gw[h * k + j] - dot);
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  if (x.rank() != 3 || weight.rank() != 3) {
    throw ShapeError("conv1d expects x [B,T,Cin] and w [k,Cin,Cout], got " + shape_str(x.shape()) +
                     " and " + shape_str(weight.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t frames = x.dim(1);
  const std::size_t cin = x.dim(2);
  const std::size_t k = weight.dim(0);
  const std::size_t cout = weight.dim(2);
  if (weight.dim(1) != cin) throw ShapeError("conv1d input channels differ from kernel");
  if (bias.numel() != cout) throw ShapeError("conv1d bias extent differs from output channels");
  if (k % 2 == 0) throw ShapeError("conv1d kernel width must be odd");
  if (stride == 0) throw ValueError("conv1d stride must be positive");
  const std::size_t pad = (k - 1) / 2;
  const std::size_t out_frames = (frames + stride - 1) / stride;
  const std::size_t width = k * cin;

  // im2col: one row of k*Cin inputs per output frame.
  std::vector<double> cols(batch * out_frames * width, 0.0);
  const double* xv = x.values().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < out_frames; ++t) {
      double* row = cols.data() + (b * out_frames + t) * width;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad);
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
        std::copy_n(xv + (b * frames + static_cast<std::size_t>(s)) * cin, cin, row + j * cin);
      }
    }
  }
  const std::size_t rows = batch * out_frames;
  std::vector<double> out(rows * cout);
  const auto& kk = simd::kernels();
  kk.gemm(rows, cout, width, cols.data(), false, weight.values().data(), false, out.data(), false);
  const double* bv = bias.values().data();
  for (std::size_t r = 0; r < rows; ++r) kk.axpy(cout, 1.0, bv, out.data() + r * cout);
  opcount::add(static_cast<std::uint64_t>(rows) * width * cout);

  return make_result({batch, out_frames, cout}, std::move(out), "conv1d", {x, weight, bias},
                     [=, cols = std::move(cols)](const Node& self) {
    const auto& kk2 = simd::kernels();
    const double* g = self.grad.data();
    if (double* gw = detail::parent_grad(self, 1)) {
      kk2.gemm(width, cout, rows, cols.data(), true, g, false, gw, true);
    }
    if (double* gb = detail::parent_grad(self, 2)) {
      for (std::size_t r = 0; r < rows; ++r) kk2.axpy(cout, 1.0, g + r * cout, gb);
    }
    if (double* gx = detail::parent_grad(self, 0)) {
      std::vector<double> gcols(rows * width);
      kk2.gemm(rows, width, cout, g, false, self.parents[1]->value.data(), true, gcols.data(), false);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < out_frames; ++t) {
          const double* row = gcols.data() + (b * out_frames + t) * width;
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t * stride + j) - static_cast<std::ptrdiff_t>(pad);
            if (s < 0 || s >= static_cast<std::ptrdiff_t>(frames)) continue;
            kk2.axpy(cin, 1.0, row + j * cin, gx + (b * frames + static_cast<std::size_t>(s)) * cin);
          }
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ValueError("dropout rate must be below 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> keep(x.numel());
  for (double& m : keep) m = rng.uniform() >= rate ? keep_scale : 0.0;
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * keep[i];
  return make_result(x.shape(), std::move(out), "dropout", {x}, [keep = std::move(keep)](const Node& self) {
    if (double* gx = detail::parent_grad(self, 0)) {
      simd::kernels().mul_acc(keep.size(), self.grad.data(), keep.data(), gx);
    }
  });
}

}  // namespace ptaco
