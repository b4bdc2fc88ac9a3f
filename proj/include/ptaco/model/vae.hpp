#pragma once
// Residual encoders: an utterance-level posterior with per-speaker prior
// means, and a phoneme-level posterior with an autoregressive LSTM prior.

#include <memory>
#include <vector>

#include "ptaco/model/encoder.hpp"
#include "ptaco/model/upsampler.hpp"
#include "ptaco/nn/blocks.hpp"

namespace ptaco::model {

// Diagonal Gaussian; leading shape [B] or [B,N], trailing latent axis.
struct LatentPosterior {
  Tensor mean;
  Tensor log_variance;
};

// mean + exp(log_variance / 2) * eps with eps ~ N(0, I) from rng.
Tensor sample_latent(const LatentPosterior& post, Rng& rng);

// 0.5 * sum_d (var_q + (mu_q - mu_p)^2 - 1 - log var_q) against N(mu_p, I),
// summed over the trailing latent axis. prior_mean broadcasts against the
// posterior mean.
Tensor kl_divergence(const LatentPosterior& post, const Tensor& prior_mean);

struct GlobalVaeConfig {
  std::size_t mel_bins = 128;
  std::size_t width = 128;
  std::size_t heads = 8;
  std::size_t kernel = 17;
  std::size_t plain_blocks = 3;
  std::size_t strided_blocks = 5;
  std::size_t latent = 8;
  std::size_t speakers = 4;
  double dropout = 0.1;
};

// Frames after `stages` stride-2 "same" convolutions: ceil(T / 2) each time.
std::size_t downsampled_length(std::size_t frames, std::size_t stages);

class GlobalPosterior {
 public:
  GlobalPosterior(ParameterStore& store, const std::string& name, const GlobalVaeConfig& config,
                  Rng& rng);
  // mel [B,T,K] -> posterior over [B, latent]. Throws on an empty utterance.
  LatentPosterior operator()(const Tensor& mel, const nn::SequenceMask& frames,
                             const nn::Context& ctx) const;
  // Learned prior mean rows [B, latent] for the given speakers.
  Tensor prior_mean(std::span<const std::int64_t> speakers) const;
  const GlobalVaeConfig& config() const { return config_; }

 private:
  GlobalVaeConfig config_;
  nn::Linear input_;
  std::vector<std::unique_ptr<nn::LConvBlock>> plain_;
  std::vector<Tensor> stride_weight_;
  std::vector<Tensor> stride_bias_;
  std::vector<std::unique_ptr<nn::LConvBlock>> strided_;
  nn::Linear mean_;
  nn::Linear log_variance_;
  Tensor prior_;  // [speakers, latent]
};

// Mean over valid positions of x [B,T,d] -> [B,d].
Tensor masked_mean_pool(const Tensor& x, const nn::SequenceMask& mask);

struct FineVaeConfig {
  std::size_t mel_bins = 128;
  std::size_t d_model = 128;  // encoder width, also the frame stack width
  std::size_t speaker_dim = 64;
  std::size_t position_dim = 32;  // width of each positional sinusoid
  std::size_t heads = 8;
  std::size_t kernel = 17;
  std::size_t blocks = 5;
  std::size_t latent = 8;
  std::size_t prior_hidden = 128;
  double dropout = 0.1;
};

class FinePosterior {
 public:
  FinePosterior(ParameterStore& store, const std::string& name, const FineVaeConfig& config, Rng& rng);
  // Posterior over [B,N,latent], zero at padded tokens. `attention`, when
  // non-null, receives the [B,N,T] alignment weights.
  LatentPosterior operator()(const Tensor& mel, const nn::SequenceMask& frames,
                             const PositionalFeatures& positions, const Tensor& speaker,
                             const EncoderOutput& enc, const nn::Context& ctx,
                             Tensor* attention = nullptr) const;
  const FineVaeConfig& config() const { return config_; }

 private:
  FineVaeConfig config_;
  nn::Linear input_;
  std::vector<std::unique_ptr<nn::LConvBlock>> blocks_;
  nn::LayerNorm query_norm_;
  nn::Linear mean_;
  nn::Linear log_variance_;
};

// Autoregressive prior over phoneme latents. All inputs are detached: the
// prior never sends gradient into the encoder, speaker table, or posterior.
class FinePrior {
 public:
  FinePrior(ParameterStore& store, const std::string& name, const FineVaeConfig& config, Rng& rng);

  struct Result {
    Tensor means;  // [B,N,latent], zero at padded tokens
    Tensor loss;   // scalar: sum over valid tokens of the per-token mean squared error
  };
  // Teacher-forced training pass against posterior means [B,N,latent].
  Result train(const EncoderOutput& enc, const Tensor& speaker, const Tensor& teacher) const;
  // Free-running rollout feeding back its own predictions.
  Tensor infer(const EncoderOutput& enc, const Tensor& speaker) const;

 private:
  Tensor step_inputs(const Tensor& enc, const Tensor& speaker, std::size_t n) const;

  FineVaeConfig config_;
  nn::LstmCell cell_;
  nn::Linear output_;
};

// Latent -> 32-channel projections feeding the conditioning concatenation.
class GlobalLatentProjection {
 public:
  GlobalLatentProjection(ParameterStore& store, const std::string& name, std::size_t latent,
                         std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& latent) const { return linear_(latent); }

 private:
  nn::Linear linear_;
};

class FineLatentProjection {
 public:
  FineLatentProjection(ParameterStore& store, const std::string& name, std::size_t latent,
                       std::size_t speaker_dim, std::size_t d_model, std::size_t out, Rng& rng);
  // latent [B,N,l], speaker [B,s], enc [B,N,d] -> [B,N,out], zero at padded tokens.
  Tensor operator()(const Tensor& latent, const Tensor& speaker, const EncoderOutput& enc) const;

 private:
  nn::Linear linear_;
};

}  // namespace ptaco::model
