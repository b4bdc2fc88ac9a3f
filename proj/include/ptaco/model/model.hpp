#pragma once
// The full text -> spectrogram model and its batched forward passes.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ptaco/corpus/corpus.hpp"
#include "ptaco/model/decoder.hpp"
#include "ptaco/model/duration.hpp"
#include "ptaco/model/encoder.hpp"
#include "ptaco/model/upsampler.hpp"
#include "ptaco/model/vae.hpp"
#include "ptaco/train/losses.hpp"

namespace ptaco::model {

struct ModelConfig {
  train::Variant variant = train::Variant::kGlobal;
  nn::BlockKind decoder_kind = nn::BlockKind::kLConv;
  bool iterative_loss = true;

  std::size_t vocab = 28;
  std::size_t speakers = 4;
  std::size_t mel_bins = 128;
  double frame_rate = 80.0;

  std::size_t d_model = 128;
  std::size_t encoder_conv_blocks = 3;
  std::size_t encoder_conv_kernel = 5;
  std::size_t encoder_blocks = 6;
  std::size_t encoder_heads = 8;
  std::size_t speaker_dim = 64;
  std::size_t latent_dim = 8;
  std::size_t latent_proj = 32;

  std::size_t vae_width = 128;  // global posterior stack width
  std::size_t vae_heads = 8;
  std::size_t vae_kernel = 17;
  std::size_t vae_plain_blocks = 3;
  std::size_t vae_strided_blocks = 5;
  std::size_t fine_blocks = 5;
  std::size_t fine_position_dim = 32;
  std::size_t prior_hidden = 128;

  std::size_t duration_blocks = 4;
  std::size_t duration_heads = 8;
  std::size_t duration_kernel = 3;

  std::size_t decoder_blocks = 6;
  std::size_t decoder_heads = 8;
  std::size_t decoder_kernel = 17;

  double dropout = 0.1;

  // d_model + speaker_dim + latent_proj
  std::size_t conditioned_width() const { return d_model + speaker_dim + latent_proj; }
  // Empty when valid; otherwise every problem found.
  std::vector<std::string> validate() const;
};

// Padded batch. Padded tokens use id 0 and duration 0.
struct Batch {
  std::size_t batch = 0;
  std::size_t tokens = 0;
  std::vector<std::int64_t> phonemes;  // [B*N]
  std::vector<std::int64_t> speakers;  // [B]
  std::vector<std::int64_t> durations;  // [B*N]
  nn::SequenceMask token_mask;
  FrameLayout layout;                  // from the ground-truth durations
  Tensor mel;                          // [B,T,K], zero at padded frames
};

Batch make_batch(const std::vector<const corpus::Utterance*>& utterances, std::size_t mel_bins);
Batch make_batch(const std::vector<corpus::Utterance>& utterances, std::size_t mel_bins);

// Detached inputs the fine prior was trained on in a forward pass.
struct PriorInputs {
  EncoderOutput encoder;
  Tensor speaker;
  Tensor teacher;  // posterior means
};

struct TrainingOutput {
  train::LossTerms terms;
  Tensor loss;
  DecoderOutput decoded;
  DurationPrediction durations;
  std::vector<Tensor> block_l1;  // per-block spec L1 sums, all blocks
  std::optional<PriorInputs> prior_inputs;  // fine variant only
};

enum class DurationSource { kTeacher, kPredicted };

struct InferenceOutput {
  std::vector<std::int64_t> durations;  // [B*N] frames driving the upsampler
  FrameLayout layout;
  Tensor mel;                           // [B,T,K] final block prediction
  DurationPrediction predicted;
};

class TtsModel {
 public:
  TtsModel(const ModelConfig& config, std::uint64_t seed);

  // Teacher-forced pass: ground-truth durations drive upsampling, the
  // posterior latent is sampled (rng from ctx). ctx.training toggles dropout.
  TrainingOutput forward(const Batch& batch, const nn::Context& ctx, double beta,
                         double lambda_dur) const;

  // Inference: latents from the prior (speaker prior mean, LSTM rollout, or
  // none); durations from the batch (teacher) or predicted and finalized.
  InferenceOutput infer(const Batch& batch, DurationSource source) const;
  InferenceOutput synthesize(const std::vector<std::int64_t>& phonemes, std::int64_t speaker) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  // Component access for tests and gradient checks.
  const TextEncoder& encoder() const { return *encoder_; }
  const SpeakerTable& speakers() const { return *speakers_; }
  const GlobalPosterior* global_posterior() const { return global_.get(); }
  const FinePosterior* fine_posterior() const { return fine_.get(); }
  const FinePrior* fine_prior() const { return prior_.get(); }
  const DurationDecoder& duration_decoder() const { return *duration_; }
  const SpecDecoder& decoder() const { return *decoder_; }

 private:
  Tensor latent_channels(const EncoderOutput& enc, const Tensor& speaker, const Tensor& latent) const;
  InferenceOutput decode_with(const Batch& batch, const EncoderOutput& enc, const Tensor& conditioned,
                              DurationSource source) const;

  ModelConfig config_;
  ParameterStore store_;
  std::unique_ptr<TextEncoder> encoder_;
  std::unique_ptr<SpeakerTable> speakers_;
  std::unique_ptr<GlobalPosterior> global_;
  std::unique_ptr<GlobalLatentProjection> global_proj_;
  std::unique_ptr<FinePosterior> fine_;
  std::unique_ptr<FinePrior> prior_;
  std::unique_ptr<FineLatentProjection> fine_proj_;
  std::unique_ptr<DurationDecoder> duration_;
  std::unique_ptr<PositionalCombiner> combiner_;
  std::unique_ptr<SpecDecoder> decoder_;
};

}  // namespace ptaco::model
