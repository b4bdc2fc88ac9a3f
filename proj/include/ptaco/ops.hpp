#pragma once
// Differentiable operations over Tensor.

#include <cstdint>
#include <span>
#include <vector>

#include "ptaco/rng.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco {

enum class UnaryOp { kNeg, kRelu, kSigmoid, kSoftplus, kTanh, kExp, kLog, kAbs, kSquare };
enum class BinaryOp { kAdd, kSub, kMul, kDiv };

// Binary ops broadcast with trailing-dimension alignment.
Tensor elementwise(UnaryOp op, const Tensor& x);
Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);

Shape broadcast_shapes(const Shape& a, const Shape& b);

inline Tensor neg(const Tensor& x) { return elementwise(UnaryOp::kNeg, x); }
inline Tensor relu(const Tensor& x) { return elementwise(UnaryOp::kRelu, x); }
inline Tensor sigmoid(const Tensor& x) { return elementwise(UnaryOp::kSigmoid, x); }
inline Tensor softplus(const Tensor& x) { return elementwise(UnaryOp::kSoftplus, x); }
inline Tensor tanh(const Tensor& x) { return elementwise(UnaryOp::kTanh, x); }
inline Tensor exp(const Tensor& x) { return elementwise(UnaryOp::kExp, x); }
inline Tensor log(const Tensor& x) { return elementwise(UnaryOp::kLog, x); }
inline Tensor abs(const Tensor& x) { return elementwise(UnaryOp::kAbs, x); }
inline Tensor square(const Tensor& x) { return elementwise(UnaryOp::kSquare, x); }

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kMul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(BinaryOp::kDiv, a, b); }

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

// [.., m, k] x [.., k, n] -> [.., m, n] with broadcast batch dims.
// A rank-1 operand is treated as a row (left) or column (right) vector.
Tensor matmul(const Tensor& a, const Tensor& b);

// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, int axis);

inline constexpr double kLayerNormEps = 1e-6;
// Normalizes over the last axis; gain and bias have that axis' extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor broadcast_to(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);

// Row lookup: table [V,d], ids with shape `id_shape` -> id_shape + [d].
Tensor embedding(const Tensor& table, std::span<const std::int64_t> ids, const Shape& id_shape);

// x [B,N,d] gathered along axis 1: out[b,t,:] = x[b, index[b*T+t], :], or
// zeros where the index is negative. Backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index, std::size_t frames);

// Depthwise convolution whose taps are softmax-normalized per head and shared
// by the d/H channels of that head. x [B,T,d], logits [H,k] with k odd.
// mask [B*T] (1 valid, 0 padded) may be empty. Centered window with zero
// padding, or a past-only window of k taps when causal.
Tensor lightweight_conv(const Tensor& x, const Tensor& logits, std::span<const double> mask,
                        bool causal = false);

// 1-D convolution with "same" zero padding. x [B,T,Cin], w [k,Cin,Cout],
// bias [Cout]; output [B, ceil(T/stride), Cout].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1);

// Inverted dropout; identity when not training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

}  // namespace ptaco
