#include <cmath>

#include "ptaco/error.hpp"
#include "ptaco/kinks.hpp"
#include "ptaco/ops.hpp"
#include "ptaco/simd/kernels.hpp"
#include "tensor_internal.hpp"

namespace ptaco {

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) +
                       " are not broadcast-compatible");
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

namespace detail {

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t axis_in = in.size() - 1 - k;
    const std::size_t axis_out = r - 1 - k;
    strides[axis_out] = in[axis_in] == 1 ? 0 : stride;
    stride *= in[axis_in];
  }
  return strides;
}

}  // namespace detail

namespace {

double unary_value(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::kNeg:
      return -x;
    case UnaryOp::kRelu:
      return x > 0.0 ? x : 0.0;
    case UnaryOp::kSigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      return std::exp(x) / (1.0 + std::exp(x));
    case UnaryOp::kSoftplus:
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case UnaryOp::kTanh:
      return std::tanh(x);
    case UnaryOp::kExp:
      return std::exp(x);
    case UnaryOp::kLog:
      return std::log(x);
    case UnaryOp::kAbs:
      return std::abs(x);
    case UnaryOp::kSquare:
      return x * x;
  }
  return 0.0;
}

// dy/dx given input x and output y.
double unary_derivative(UnaryOp op, double x, double y) {
  switch (op) {
    case UnaryOp::kNeg:
      return -1.0;
    case UnaryOp::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case UnaryOp::kSigmoid:
      return y * (1.0 - y);
    case UnaryOp::kSoftplus:
      return unary_value(UnaryOp::kSigmoid, x);
    case UnaryOp::kTanh:
      return 1.0 - y * y;
    case UnaryOp::kExp:
      return y;
    case UnaryOp::kLog:
      return 1.0 / x;
    case UnaryOp::kAbs:
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case UnaryOp::kSquare:
      return 2.0 * x;
  }
  return 0.0;
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::kNeg:
      return "neg";
    case UnaryOp::kRelu:
      return "relu";
    case UnaryOp::kSigmoid:
      return "sigmoid";
    case UnaryOp::kSoftplus:
      return "softplus";
    case UnaryOp::kTanh:
      return "tanh";
    case UnaryOp::kExp:
      return "exp";
    case UnaryOp::kLog:
      return "log";
    case UnaryOp::kAbs:
      return "abs";
    case UnaryOp::kSquare:
      return "square";
  }
  return "unary";
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd:
      return "add";
    case BinaryOp::kSub:
      return "sub";
    case BinaryOp::kMul:
      return "mul";
    case BinaryOp::kDiv:
      return "div";
  }
  return "binary";
}

double binary_value(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::kAdd:
      return a + b;
    case BinaryOp::kSub:
      return a - b;
    case BinaryOp::kMul:
      return a * b;
    case BinaryOp::kDiv:
      return a / b;
  }
  return 0.0;
}

}  // namespace

Tensor elementwise(UnaryOp op, const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = unary_value(op, xv[i]);
  if ((op == UnaryOp::kRelu || op == UnaryOp::kAbs) && kinks::recording()) {
    for (double v : xv) kinks::observe(v);
  }
  return make_result(x.shape(), std::move(out), unary_name(op), {x}, [op](const Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * unary_derivative(op, in.value[i], self.value[i]);
    }
  });
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  const std::size_t n = shape_numel(out_shape);
  std::vector<double> out(n);
  const auto& k = simd::kernels();

  if (a.shape() == b.shape()) {
    const double* av = a.values().data();
    const double* bv = b.values().data();
    if (op == BinaryOp::kAdd) {
      k.add(n, av, bv, out.data());
    } else if (op == BinaryOp::kMul) {
      k.mul(n, av, bv, out.data());
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] = binary_value(op, av[i], bv[i]);
    }
    return make_result(out_shape, std::move(out), binary_name(op), {a, b}, [op](const Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const std::size_t m = self.grad.size();
      const auto& kk = simd::kernels();
      const double* g = self.grad.data();
      if (na.requires_grad) {
        double* ga = na.ensure_grad().data();
        switch (op) {
          case BinaryOp::kAdd:
          case BinaryOp::kSub:
            kk.axpy(m, 1.0, g, ga);
            break;
          case BinaryOp::kMul:
            kk.mul_acc(m, g, nb.value.data(), ga);
            break;
          case BinaryOp::kDiv:
            for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] / nb.value[i];
            break;
        }
      }
      if (nb.requires_grad) {
        double* gb = nb.ensure_grad().data();
        switch (op) {
          case BinaryOp::kAdd:
            kk.axpy(m, 1.0, g, gb);
            break;
          case BinaryOp::kSub:
            kk.axpy(m, -1.0, g, gb);
            break;
          case BinaryOp::kMul:
            kk.mul_acc(m, g, na.value.data(), gb);
            break;
          case BinaryOp::kDiv:
            for (std::size_t i = 0; i < m; ++i) {
              gb[i] -= g[i] * na.value[i] / (nb.value[i] * nb.value[i]);
            }
            break;
        }
      }
    });
  }

  const auto sa = detail::broadcast_strides(a.shape(), out_shape);
  const auto sb = detail::broadcast_strides(b.shape(), out_shape);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  detail::for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = binary_value(op, av[ia], bv[ib]);
  });
  return make_result(out_shape, std::move(out), binary_name(op), {a, b},
                     [op, out_shape, sa, sb](const Node& self) {
    Node& na = *self.parents[0];
    Node& nb = *self.parents[1];
    const double* g = self.grad.data();
    double* ga = na.requires_grad ? na.ensure_grad().data() : nullptr;
    double* gb = nb.requires_grad ? nb.ensure_grad().data() : nullptr;
    const double* av = na.value.data();
    const double* bv = nb.value.data();
    detail::for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (op) {
        case BinaryOp::kAdd:
          if (ga) ga[ia] += g[i];
          if (gb) gb[ib] += g[i];
          break;
        case BinaryOp::kSub:
          if (ga) ga[ia] += g[i];
          if (gb) gb[ib] -= g[i];
          break;
        case BinaryOp::kMul:
          if (ga) ga[ia] += g[i] * bv[ib];
          if (gb) gb[ib] += g[i] * av[ia];
          break;
        case BinaryOp::kDiv:
          if (ga) ga[ia] += g[i] / bv[ib];
          if (gb) gb[ib] -= g[i] * av[ia] / (bv[ib] * bv[ib]);
          break;
      }
    });
  });
}

Tensor scale(const Tensor& x, double factor) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * factor;
  return make_result(x.shape(), std::move(out), "scale", {x}, [factor](const Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    simd::kernels().axpy(self.grad.size(), factor, self.grad.data(), in.ensure_grad().data());
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + offset;
  return make_result(x.shape(), std::move(out), "add_scalar", {x}, [](const Node& self) {
    Node& in = *self.parents[0];
    if (!in.requires_grad) return;
    simd::kernels().axpy(self.grad.size(), 1.0, self.grad.data(), in.ensure_grad().data());
  });
}

}  // namespace ptaco
