#pragma once
// Assembly of the training objective from its parts.

#include <string>
#include <vector>

#include "ptaco/tensor.hpp"

namespace ptaco::train {

enum class Variant { kNoVae, kGlobal, kFine };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

// Unnormalized parts; total_loss applies the normalizers.
struct LossTerms {
  std::vector<Tensor> spec;  // L1 sums, one per block included in the objective
  Tensor duration;           // CE sum + L1 sum over valid tokens
  Tensor kl;                 // batch mean of the per-utterance KL; global and fine only
  Tensor prior;              // fine prior squared-error sum; fine only
  double lambda_dur = 1.0;
  double beta = 1.0;
  std::size_t mel_bins = 0;  // K
  std::size_t frames = 0;    // T, valid frames in the batch
  std::size_t tokens = 0;    // N, valid tokens in the batch
};

// (1/KT) sum_i spec_i + (lambda/N) duration [+ beta kl] [+ prior / N].
// Throws ValueError when the populated terms do not match the variant.
Tensor total_loss(Variant variant, const LossTerms& terms);

}  // namespace ptaco::train
