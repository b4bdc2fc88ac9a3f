#pragma once
// Building blocks shared by every model component.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ptaco/ops.hpp"
#include "ptaco/parameter.hpp"
#include "ptaco/rng.hpp"

namespace ptaco::nn {

// Per-call evaluation state. Dropout draws from `rng` in training mode.
struct Context {
  bool training = false;
  Rng* rng = nullptr;
};

// Validity of each (batch, position) pair of a padded batch.
class SequenceMask {
 public:
  SequenceMask() = default;
  // Valid prefix of length lengths[b] in a sequence of extent `length`.
  static SequenceMask from_lengths(std::vector<std::size_t> lengths, std::size_t length);
  static SequenceMask all_valid(std::size_t batch, std::size_t length);

  std::size_t batch() const { return lengths_.size(); }
  std::size_t length() const { return length_; }
  std::size_t length_of(std::size_t b) const { return lengths_[b]; }
  const std::vector<std::size_t>& lengths() const { return lengths_; }
  std::size_t total() const;
  bool valid(std::size_t b, std::size_t t) const { return t < lengths_[b]; }
  // Flat [B*T] array of 1.0 / 0.0.
  std::span<const double> values() const { return values_; }
  // Constant [B,T,1] tensor for multiplying into [B,T,d] activations.
  Tensor column() const;
  // Constant [B,1,1,T] tensor: 0 for valid keys, -1e9 for padded keys.
  Tensor key_bias() const;

 private:
  std::vector<std::size_t> lengths_;
  std::size_t length_ = 0;
  std::vector<double> values_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
         bool zero_init = false, bool use_bias = true);
  Tensor operator()(const Tensor& x) const;

  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }
  const Tensor& weight() const { return weight_; }
  // Undefined when constructed without bias.
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;  // [in, out]
  Tensor bias_;    // [out]
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain_, bias_); }

 private:
  Tensor gain_;
  Tensor bias_;
};

// ReLU(x W1 + b1) W2 + b2 with a 4x wider hidden layer.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng);
  Tensor operator()(const Tensor& x, double dropout_rate, const Context& ctx) const;

 private:
  Linear expand_;
  Linear contract_;
};

// Scaled dot-product attention of queries [.., Nq, d] against keys/values
// [.., Nk, d]. `key_bias` broadcasts against the [.., Nq, Nk] scores.
// When `weights` is non-null it receives the attention probabilities.
Tensor attend(const Tensor& query, const Tensor& key, const Tensor& value, const Tensor& key_bias,
              Tensor* weights = nullptr);

// sin/cos features: channel 2i = sin(p / 10000^(2i/d)), 2i+1 = cos(same).
// Returns [P, d]; positions may be fractional. d must be even.
Tensor sinusoidal_embedding(std::span<const double> positions, std::size_t d);

// Single-layer LSTM cell; gates ordered input, forget, cell, output.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
           Rng& rng);

  struct State {
    Tensor h;  // [B, hidden]
    Tensor c;  // [B, hidden]
  };
  State initial(std::size_t batch) const;
  State step(const Tensor& x, const State& state) const;
  std::size_t hidden() const { return hidden_; }

 private:
  Linear input_;   // x -> 4h
  Tensor recurrent_;  // [hidden, 4h], no bias
  std::size_t hidden_ = 0;
};

}  // namespace ptaco::nn
