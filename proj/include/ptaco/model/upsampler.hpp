#pragma once
// Duration-driven expansion of token features to frames, plus the three
// within-phoneme positional features and their per-channel blend.

#include <cstdint>
#include <span>
#include <vector>

#include "ptaco/nn/layers.hpp"

namespace ptaco::model {

// Where every output frame comes from.
struct FrameLayout {
  std::size_t batch = 0;
  std::size_t frames = 0;             // T = max over the batch of sum(durations)
  std::vector<std::int64_t> token;    // [B*T] source token, -1 for padding
  std::vector<double> within;         // [B*T] j, index of the frame inside its token
  std::vector<double> length;         // [B*T] f, frame count of its token
  nn::SequenceMask mask;              // [B,T]
};

// durations is row-major [B,N]. Throws ValueError on negative entries or an
// utterance whose durations sum to 0.
FrameLayout frame_layout(std::span<const std::int64_t> durations, std::size_t batch,
                         std::size_t tokens);

// hidden [B,N,d] -> [B,T,d]; token n is repeated durations[n] times.
Tensor upsample(const Tensor& hidden, const FrameLayout& layout);

struct PositionalFeatures {
  Tensor within;    // [B,T,d] sinusoid(j)
  Tensor duration;  // [B,T,d] sinusoid(f)
  Tensor fraction;  // [B,T,1] j / f
};

// All three features, zero at padded frames. d must be even.
PositionalFeatures positional_features(const FrameLayout& layout, std::size_t d);

// out = upsampled + sum_s softmax_s(logits[:, c]) * feature_s[c], where the
// fraction feature is first lifted to d channels by a learned 1 -> d map.
class PositionalCombiner {
 public:
  PositionalCombiner(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng);
  Tensor operator()(const Tensor& upsampled, const PositionalFeatures& features,
                    const nn::SequenceMask& mask) const;
  // Blend weights [3, d]; every column sums to 1.
  Tensor weights() const { return softmax(logits_, 0); }
  const Tensor& logits() const { return logits_; }

 private:
  Tensor logits_;  // [3, d]
  nn::Linear fraction_;
};

}  // namespace ptaco::model
