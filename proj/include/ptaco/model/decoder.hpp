#pragma once
// Spectrogram decoder stack with a mel projection after every block.

#include <memory>
#include <vector>

#include "ptaco/nn/blocks.hpp"

namespace ptaco::model {

struct DecoderConfig {
  nn::BlockKind kind = nn::BlockKind::kLConv;
  std::size_t blocks = 6;
  std::size_t heads = 8;
  std::size_t kernel = 17;
  std::size_t width = 224;
  std::size_t mel_bins = 128;
  double dropout = 0.1;
};

struct DecoderOutput {
  std::vector<Tensor> mels;  // one [B,T,K] prediction per block
  const Tensor& final() const { return mels.back(); }
};

class SpecDecoder {
 public:
  SpecDecoder(ParameterStore& store, const std::string& name, const DecoderConfig& config, Rng& rng);
  DecoderOutput operator()(const Tensor& frames, const nn::SequenceMask& mask,
                           const nn::Context& ctx) const;
  const DecoderConfig& config() const { return config_; }

 private:
  DecoderConfig config_;
  std::vector<std::unique_ptr<nn::SequenceBlock>> blocks_;
  std::vector<nn::Linear> projections_;
};

// Sum over valid frames and bins of |pred - target| for one prediction.
Tensor spec_l1(const Tensor& pred, const Tensor& target, const nn::SequenceMask& mask);

// sum_i spec_l1(mels[i]) / (K * valid frames).
Tensor iterative_spec_loss(const DecoderOutput& out, const Tensor& target,
                           const nn::SequenceMask& mask);

// spec_l1(final) / (K * valid frames).
Tensor single_spec_loss(const DecoderOutput& out, const Tensor& target,
                        const nn::SequenceMask& mask);

// Autoregressive stand-in for the speed comparison: the same number of causal
// LConv blocks at the same width, driven one frame at a time. Frame t feeds a
// projection of frame t-1's mel prediction into the input and recomputes the
// stack over the receptive-field window ending at t, as a decoder without
// cached activations would.
class ArSimDecoder {
 public:
  ArSimDecoder(ParameterStore& store, const std::string& name, const DecoderConfig& config, Rng& rng);
  // frames [B,T,width] -> final mel [B,T,K].
  Tensor operator()(const Tensor& frames) const;
  std::size_t receptive_field() const;

 private:
  DecoderConfig config_;
  nn::Linear prenet_;
  std::vector<std::unique_ptr<nn::LConvBlock>> blocks_;
  nn::Linear projection_;
};

}  // namespace ptaco::model
