#include "ptaco/model/encoder.hpp"

#include "ptaco/error.hpp"

namespace ptaco::model {

TextEncoder::TextEncoder(ParameterStore& store, const std::string& name,
                         const EncoderConfig& config, Rng& rng)
    : config_(config) {
  if (config.d_model == 0 || config.d_model % 2 != 0) {
    throw ValueError("encoder width must be positive and even");
  }
  table_ = store.create(name + "/embedding", {config.vocab, config.d_model}, Init::kNormal, rng, 0.3);
  for (std::size_t i = 0; i < config.conv_blocks; ++i) {
    conv_.push_back(std::make_unique<nn::ConvBlock>(
        store, name + "/conv" + std::to_string(i),
        nn::ConvBlockConfig{config.d_model, config.d_model, config.conv_kernel, config.dropout}, rng));
  }
  for (std::size_t i = 0; i < config.transformer_blocks; ++i) {
    attention_.push_back(std::make_unique<nn::TransformerBlock>(
        store, name + "/transformer" + std::to_string(i),
        nn::TransformerConfig{config.d_model, config.heads, config.dropout}, rng));
  }
}

EncoderOutput TextEncoder::operator()(std::span<const std::int64_t> ids,
                                      const nn::SequenceMask& mask, const nn::Context& ctx) const {
  const std::size_t b = mask.batch(), n = mask.length();
  if (ids.size() != b * n) throw ShapeError("phoneme ids do not match the token mask");
  Tensor x = nn::apply_mask(embedding(table_, ids, {b, n}), mask);
  for (const auto& block : conv_) x = (*block)(x, mask, ctx);
  x = nn::apply_mask(add(x, token_positions(n, config_.d_model)), mask);
  for (const auto& block : attention_) x = (*block)(x, mask, ctx);
  return {x, mask};
}

SpeakerTable::SpeakerTable(ParameterStore& store, const std::string& name, std::size_t speakers,
                           std::size_t dim, Rng& rng)
    : table_(store.create(name, {speakers, dim}, Init::kNormal, rng, 0.3)) {}

Tensor SpeakerTable::operator()(std::span<const std::int64_t> speaker_ids) const {
  for (std::int64_t id : speaker_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= count()) {
      throw ValueError("speaker id " + std::to_string(id) + " out of range [0," +
                       std::to_string(count()) + ")");
    }
  }
  return embedding(table_, speaker_ids, {speaker_ids.size()});
}

Tensor token_positions(std::size_t tokens, std::size_t d) {
  std::vector<double> pos(tokens);
  for (std::size_t i = 0; i < tokens; ++i) pos[i] = static_cast<double>(i);
  return nn::sinusoidal_embedding(pos, d);
}

Tensor tile_tokens(const Tensor& x, std::size_t tokens) {
  const std::size_t b = x.dim(0), c = x.dim(1);
  return broadcast_to(reshape(x, {b, 1, c}), {b, tokens, c});
}

Tensor attach_conditioning(const EncoderOutput& enc, const Tensor& speaker, const Tensor& latent) {
  const std::size_t b = enc.hidden.dim(0), n = enc.hidden.dim(1);
  if (speaker.rank() != 2 || speaker.dim(0) != b) {
    throw ShapeError("speaker embedding must be [B,s], got " + shape_str(speaker.shape()));
  }
  Tensor lat;
  if (latent.rank() == 2 && latent.dim(0) == b) {
    lat = tile_tokens(latent, n);
  } else if (latent.rank() == 3 && latent.dim(0) == b && latent.dim(1) == n) {
    lat = latent;
  } else {
    throw ShapeError("latent must be [B,l] or [B,N,l], got " + shape_str(latent.shape()));
  }
  return nn::apply_mask(concat({enc.hidden, tile_tokens(speaker, n), lat}, -1), enc.mask);
}

}  // namespace ptaco::model
