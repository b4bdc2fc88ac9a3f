#pragma once
// Two-headed duration decoder: a non-zero gate and a duration in seconds.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ptaco/nn/blocks.hpp"

namespace ptaco::model {

inline constexpr double kNonZeroThreshold = 0.99;

struct DurationConfig {
  std::size_t width = 224;  // conditioned encoder width
  std::size_t blocks = 4;
  std::size_t heads = 8;
  std::size_t kernel = 3;
  double dropout = 0.1;
};

struct DurationPrediction {
  Tensor logit;    // [B,N] pre-sigmoid gate
  Tensor p_z;      // [B,N] probability of a non-zero duration
  Tensor seconds;  // [B,N] softplus output
  Tensor hidden;   // [B,N,width] last block activation
};

struct DurationTarget {
  std::vector<std::int64_t> frames;  // [B*N]
  Tensor seconds;                    // [B,N] frames / frame_rate
  Tensor nonzero;                    // [B,N] 1 where frames > 0
};

DurationTarget make_duration_target(std::span<const std::int64_t> frames, std::size_t batch,
                                    std::size_t tokens, double frame_rate);

class DurationDecoder {
 public:
  DurationDecoder(ParameterStore& store, const std::string& name, const DurationConfig& config,
                  Rng& rng);
  DurationPrediction operator()(const Tensor& conditioned, const nn::SequenceMask& mask,
                                const nn::Context& ctx) const;

 private:
  DurationConfig config_;
  std::vector<std::unique_ptr<nn::LConvBlock>> blocks_;
  nn::Linear gate_;
  nn::Linear seconds_;
};

struct DurationLoss {
  Tensor ce;  // sum over valid tokens of binary cross-entropy
  Tensor l1;  // sum over valid tokens of |seconds - target|
  Tensor total() const { return add(ce, l1); }
};

DurationLoss duration_loss(const DurationPrediction& pred, const DurationTarget& target,
                           const nn::SequenceMask& mask);

// Seconds gated by p_z >= 0.99, converted to frames by rounding the running
// sum so the total length is round(rate * sum of gated seconds). Rows are
// [tokens] each. Throws RuntimeFailure when every token of a row is gated off
// or rounds to zero frames.
std::vector<std::int64_t> finalize_durations(std::span<const double> p_z,
                                             std::span<const double> seconds, double frame_rate);

// Batched form over the valid tokens of each row; padded tokens get 0.
std::vector<std::int64_t> finalize_durations(const DurationPrediction& pred,
                                             const nn::SequenceMask& mask, double frame_rate);

}  // namespace ptaco::model
