#pragma once
// Phoneme encoder and the conditioning concatenation that follows it.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ptaco/nn/blocks.hpp"

namespace ptaco::model {

struct EncoderConfig {
  std::size_t vocab = 28;
  std::size_t d_model = 128;
  std::size_t conv_blocks = 3;
  std::size_t conv_kernel = 5;
  std::size_t transformer_blocks = 6;
  std::size_t heads = 8;
  double dropout = 0.1;
};

struct EncoderOutput {
  Tensor hidden;         // [B,N,d_model], zero at padded tokens
  nn::SequenceMask mask;  // [B,N]
};

class TextEncoder {
 public:
  TextEncoder(ParameterStore& store, const std::string& name, const EncoderConfig& config, Rng& rng);

  // ids is row-major [B,N]; entries at padded positions must still be valid ids.
  EncoderOutput operator()(std::span<const std::int64_t> ids, const nn::SequenceMask& mask,
                           const nn::Context& ctx) const;
  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  Tensor table_;  // [vocab, d_model]
  std::vector<std::unique_ptr<nn::SequenceBlock>> conv_;
  std::vector<std::unique_ptr<nn::SequenceBlock>> attention_;
};

// Learned per-speaker vectors.
class SpeakerTable {
 public:
  SpeakerTable(ParameterStore& store, const std::string& name, std::size_t speakers, std::size_t dim,
               Rng& rng);
  // [B, dim]; throws ValueError naming an out-of-range id.
  Tensor operator()(std::span<const std::int64_t> speaker_ids) const;
  std::size_t dim() const { return table_.dim(1); }
  std::size_t count() const { return table_.dim(0); }

 private:
  Tensor table_;
};

// Token positions 0..N-1 as a [N, d] sinusoid table.
Tensor token_positions(std::size_t tokens, std::size_t d);

// Tiles x [B,c] to [B,N,c].
Tensor tile_tokens(const Tensor& x, std::size_t tokens);

// [enc | speaker | latent] along channels, zeroed at padded tokens.
// speaker is [B,s]; latent is [B,l] (tiled over tokens) or [B,N,l].
Tensor attach_conditioning(const EncoderOutput& enc, const Tensor& speaker, const Tensor& latent);

}  // namespace ptaco::model
