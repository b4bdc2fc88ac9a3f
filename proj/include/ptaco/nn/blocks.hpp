#pragma once
// Residual sequence blocks operating on [B,T,d] activations.

#include <cstddef>
#include <memory>
#include <string>

#include "ptaco/nn/layers.hpp"

namespace ptaco::nn {

// Common interface of the stackable blocks. Outputs are zero at padded
// positions.
class SequenceBlock {
 public:
  virtual ~SequenceBlock() = default;
  virtual Tensor operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const = 0;
};

struct LConvConfig {
  std::size_t d = 0;
  std::size_t heads = 8;
  std::size_t kernel = 17;
  double dropout = 0.1;
  bool causal = false;
};

// Pre-norm block:
//   h = x + drop(lconv(glu(LN(x))))
//   y = h + ff(LN(h))
class LConvBlock : public SequenceBlock {
 public:
  LConvBlock(ParameterStore& store, const std::string& name, const LConvConfig& config, Rng& rng);
  Tensor operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const override;

  const Tensor& kernel_logits() const { return logits_; }
  const LConvConfig& config() const { return config_; }

 private:
  LConvConfig config_;
  LayerNorm norm1_;
  Linear glu_;  // d -> 2d, value then gate
  Tensor logits_;  // [H, k]
  LayerNorm norm2_;
  FeedForward ff_;
};

struct TransformerConfig {
  std::size_t d = 0;
  std::size_t heads = 8;
  double dropout = 0.1;
};

// Pre-norm block:
//   h = x + drop(W_o mha(LN(x)))
//   y = h + ff(LN(h))
// Padded keys receive a -1e9 score bias. The key projection has no bias: a
// per-query constant shift leaves the softmax unchanged.
class TransformerBlock : public SequenceBlock {
 public:
  TransformerBlock(ParameterStore& store, const std::string& name, const TransformerConfig& config,
                   Rng& rng);
  Tensor operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const override;

  // Attention sublayer alone, before the residual. `weights`, when non-null,
  // receives the probabilities [B,H,T,T].
  Tensor attention(const Tensor& x, const SequenceMask& mask, Tensor* weights) const;

 private:
  TransformerConfig config_;
  LayerNorm norm1_;
  Linear query_, key_, value_, output_;
  LayerNorm norm2_;
  FeedForward ff_;
};

struct ConvBlockConfig {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::size_t kernel = 5;
  double dropout = 0.1;
};

// conv1d -> layer norm -> ReLU -> dropout, no residual.
class ConvBlock : public SequenceBlock {
 public:
  ConvBlock(ParameterStore& store, const std::string& name, const ConvBlockConfig& config, Rng& rng);
  Tensor operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const override;

 private:
  ConvBlockConfig config_;
  Tensor weight_;  // [k, d_in, d_out]
  Tensor bias_;
  LayerNorm norm_;
};

enum class BlockKind { kLConv, kTransformer };

std::unique_ptr<SequenceBlock> make_block(BlockKind kind, ParameterStore& store,
                                          const std::string& name, std::size_t d,
                                          std::size_t heads, std::size_t kernel, double dropout,
                                          Rng& rng);

// Zeroes padded positions of x [B,T,d].
Tensor apply_mask(const Tensor& x, const SequenceMask& mask);

}  // namespace ptaco::nn
