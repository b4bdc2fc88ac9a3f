#include "ptaco/nn/blocks.hpp"

#include "ptaco/error.hpp"

namespace ptaco::nn {

namespace {

void check_heads(std::size_t d, std::size_t heads) {
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw ShapeError(std::to_string(heads) + " heads do not divide width " + std::to_string(d));
  }
}

void check_input(const Tensor& x, const SequenceMask& mask, std::size_t d) {
  if (x.rank() != 3 || x.dim(2) != d) {
    throw ShapeError("block expects [B,T," + std::to_string(d) + "], got " + shape_str(x.shape()));
  }
  if (mask.batch() != x.dim(0) || mask.length() != x.dim(1)) {
    throw ShapeError("mask does not match activations " + shape_str(x.shape()));
  }
}

Tensor maybe_dropout(const Tensor& x, double rate, const Context& ctx) {
  if (!ctx.training || rate == 0.0) return x;
  return dropout(x, rate, true, *ctx.rng);
}

}  // namespace

Tensor apply_mask(const Tensor& x, const SequenceMask& mask) { return mul(x, mask.column()); }

LConvBlock::LConvBlock(ParameterStore& store, const std::string& name, const LConvConfig& config,
                       Rng& rng)
    : config_(config),
      norm1_(store, name + "/norm1", config.d, rng),
      glu_(store, name + "/glu", config.d, 2 * config.d, rng),
      logits_(),
      norm2_(store, name + "/norm2", config.d, rng),
      ff_(store, name + "/ff", config.d, rng) {
  check_heads(config.d, config.heads);
  if (config.kernel % 2 == 0) throw ShapeError("lightweight conv kernel width must be odd");
  logits_ = store.create(name + "/lconv", {config.heads, config.kernel}, Init::kZeros, rng);
}

Tensor LConvBlock::operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const {
  check_input(x, mask, config_.d);
  const std::size_t d = config_.d;
  Tensor projected = glu_(norm1_(x));
  Tensor gated = mul(slice(projected, -1, 0, d), sigmoid(slice(projected, -1, d, d)));
  Tensor conv = lightweight_conv(gated, logits_, mask.values(), config_.causal);
  Tensor h = apply_mask(add(x, maybe_dropout(conv, config_.dropout, ctx)), mask);
  Tensor y = add(h, ff_(norm2_(h), config_.dropout, ctx));
  return apply_mask(y, mask);
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& name,
                                   const TransformerConfig& config, Rng& rng)
    : config_(config),
      norm1_(store, name + "/norm1", config.d, rng),
      query_(store, name + "/query", config.d, config.d, rng),
      key_(store, name + "/key", config.d, config.d, rng, false, false),
      value_(store, name + "/value", config.d, config.d, rng),
      output_(store, name + "/output", config.d, config.d, rng),
      norm2_(store, name + "/norm2", config.d, rng),
      ff_(store, name + "/ff", config.d, rng) {
  check_heads(config.d, config.heads);
}

Tensor TransformerBlock::attention(const Tensor& x, const SequenceMask& mask, Tensor* weights) const {
  const std::size_t b = x.dim(0), t = x.dim(1), d = config_.d, h = config_.heads;
  auto split = [&](const Tensor& y) { return permute(reshape(y, {b, t, h, d / h}), {0, 2, 1, 3}); };
  Tensor n = norm1_(x);
  Tensor heads = attend(split(query_(n)), split(key_(n)), split(value_(n)), mask.key_bias(), weights);
  return output_(reshape(permute(heads, {0, 2, 1, 3}), {b, t, d}));
}

Tensor TransformerBlock::operator()(const Tensor& x, const SequenceMask& mask,
                                    const Context& ctx) const {
  check_input(x, mask, config_.d);
  Tensor h = apply_mask(add(x, maybe_dropout(attention(x, mask, nullptr), config_.dropout, ctx)), mask);
  Tensor y = add(h, ff_(norm2_(h), config_.dropout, ctx));
  return apply_mask(y, mask);
}

ConvBlock::ConvBlock(ParameterStore& store, const std::string& name, const ConvBlockConfig& config,
                     Rng& rng)
    : config_(config),
      weight_(store.create(name + "/conv/weight", {config.kernel, config.d_in, config.d_out},
                           Init::kGlorotUniform, rng)),
      bias_(store.create(name + "/conv/bias", {config.d_out}, Init::kZeros, rng)),
      norm_(store, name + "/norm", config.d_out, rng) {
  if (config.kernel % 2 == 0) throw ShapeError("conv block kernel width must be odd");
}

Tensor ConvBlock::operator()(const Tensor& x, const SequenceMask& mask, const Context& ctx) const {
  check_input(x, mask, config_.d_in);
  Tensor y = relu(norm_(conv1d(apply_mask(x, mask), weight_, bias_)));
  return apply_mask(maybe_dropout(y, config_.dropout, ctx), mask);
}

std::unique_ptr<SequenceBlock> make_block(BlockKind kind, ParameterStore& store,
                                          const std::string& name, std::size_t d,
                                          std::size_t heads, std::size_t kernel, double dropout,
                                          Rng& rng) {
  if (kind == BlockKind::kLConv) {
    return std::make_unique<LConvBlock>(store, name, LConvConfig{d, heads, kernel, dropout, false}, rng);
  }
  return std::make_unique<TransformerBlock>(store, name, TransformerConfig{d, heads, dropout}, rng);
}

}  // namespace ptaco::nn
