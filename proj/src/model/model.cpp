#include "ptaco/model/model.hpp"

#include <algorithm>

#include "ptaco/error.hpp"

namespace ptaco::model {

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> errors;
  auto positive = [&](std::size_t v, const char* name) {
    if (v == 0) errors.push_back(std::string(name) + " must be positive");
  };
  auto divides = [&](std::size_t heads, std::size_t width, const char* what) {
    if (heads == 0 || width % heads != 0) {
      errors.push_back(std::string(what) + ": " + std::to_string(heads) + " heads do not divide width " +
                       std::to_string(width));
    }
  };
  auto odd = [&](std::size_t k, const char* name) {
    if (k % 2 == 0) errors.push_back(std::string(name) + " must be odd, got " + std::to_string(k));
  };
  positive(vocab, "vocab");
  positive(speakers, "speakers");
  positive(mel_bins, "mel_bins");
  positive(d_model, "d_model");
  positive(speaker_dim, "speaker_dim");
  positive(latent_dim, "latent_dim");
  positive(latent_proj, "latent_proj");
  positive(decoder_blocks, "decoder_blocks");
  positive(prior_hidden, "prior_hidden");
  if (frame_rate <= 0.0) errors.push_back("frame_rate must be positive");
  if (dropout < 0.0 || dropout >= 1.0) errors.push_back("dropout must lie in [0,1)");
  if (d_model % 2 != 0) errors.push_back("d_model must be even");
  if (conditioned_width() % 2 != 0) errors.push_back("d_model + speaker_dim + latent_proj must be even");
  if (fine_position_dim == 0 || fine_position_dim % 2 != 0) {
    errors.push_back("fine_position_dim must be positive and even");
  }
  divides(encoder_heads, d_model, "encoder");
  divides(duration_heads, conditioned_width(), "duration decoder");
  divides(decoder_heads, conditioned_width(), "spectrogram decoder");
  if (variant == train::Variant::kGlobal) divides(vae_heads, vae_width, "global posterior");
  if (variant == train::Variant::kFine) divides(vae_heads, d_model, "fine posterior");
  odd(encoder_conv_kernel, "encoder_conv_kernel");
  odd(vae_kernel, "vae_kernel");
  odd(duration_kernel, "duration_kernel");
  odd(decoder_kernel, "decoder_kernel");
  return errors;
}

Batch make_batch(const std::vector<const corpus::Utterance*>& utterances, std::size_t mel_bins) {
  if (utterances.empty()) throw ValueError("empty batch");
  Batch b;
  b.batch = utterances.size();
  std::vector<std::size_t> lengths;
  for (const auto* u : utterances) {
    if (u->phonemes.empty()) throw ValueError("utterance without tokens");
    if (u->mel_bins != mel_bins) {
      throw ShapeError("utterance has " + std::to_string(u->mel_bins) + " mel bins, model expects " +
                       std::to_string(mel_bins));
    }
    b.tokens = std::max(b.tokens, u->phonemes.size());
    lengths.push_back(u->phonemes.size());
  }
  b.phonemes.assign(b.batch * b.tokens, 0);
  b.durations.assign(b.batch * b.tokens, 0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto* u = utterances[i];
    b.speakers.push_back(u->speaker);
    std::copy(u->phonemes.begin(), u->phonemes.end(), b.phonemes.begin() + static_cast<std::ptrdiff_t>(i * b.tokens));
    std::copy(u->durations.begin(), u->durations.end(), b.durations.begin() + static_cast<std::ptrdiff_t>(i * b.tokens));
  }
  b.token_mask = nn::SequenceMask::from_lengths(std::move(lengths), b.tokens);
  b.layout = frame_layout(b.durations, b.batch, b.tokens);
  const std::size_t t = b.layout.frames;
  std::vector<double> mel(b.batch * t * mel_bins, 0.0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto* u = utterances[i];
    if (u->frames() != b.layout.mask.length_of(i)) {
      throw ShapeError("utterance " + std::to_string(i) + " has " + std::to_string(u->frames()) +
                       " frames but its durations sum to " + std::to_string(b.layout.mask.length_of(i)));
    }
    std::copy(u->mel.begin(), u->mel.end(), mel.begin() + static_cast<std::ptrdiff_t>(i * t * mel_bins));
  }
  b.mel = Tensor::from_vector({b.batch, t, mel_bins}, std::move(mel));
  return b;
}

Batch make_batch(const std::vector<corpus::Utterance>& utterances, std::size_t mel_bins) {
  std::vector<const corpus::Utterance*> ptrs;
  for (const auto& u : utterances) ptrs.push_back(&u);
  return make_batch(ptrs, mel_bins);
}

TtsModel::TtsModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  const auto errors = config.validate();
  if (!errors.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValueError(msg);
  }
  Rng rng(seed);
  const ModelConfig& c = config_;
  const std::size_t dc = c.conditioned_width();
  encoder_ = std::make_unique<TextEncoder>(
      store_, "encoder",
      EncoderConfig{c.vocab, c.d_model, c.encoder_conv_blocks, c.encoder_conv_kernel, c.encoder_blocks,
                    c.encoder_heads, c.dropout},
      rng);
  speakers_ = std::make_unique<SpeakerTable>(store_, "speaker_embedding", c.speakers, c.speaker_dim, rng);
  if (c.variant == train::Variant::kGlobal) {
    global_ = std::make_unique<GlobalPosterior>(
        store_, "global_vae",
        GlobalVaeConfig{c.mel_bins, c.vae_width, c.vae_heads, c.vae_kernel, c.vae_plain_blocks,
                        c.vae_strided_blocks, c.latent_dim, c.speakers, c.dropout},
        rng);
    global_proj_ = std::make_unique<GlobalLatentProjection>(store_, "global_vae/project", c.latent_dim,
                                                            c.latent_proj, rng);
  } else if (c.variant == train::Variant::kFine) {
    const FineVaeConfig fc{c.mel_bins, c.d_model,   c.speaker_dim, c.fine_position_dim, c.vae_heads,
                           c.vae_kernel, c.fine_blocks, c.latent_dim, c.prior_hidden,  c.dropout};
    fine_ = std::make_unique<FinePosterior>(store_, "fine_vae", fc, rng);
    prior_ = std::make_unique<FinePrior>(store_, "fine_prior", fc, rng);
    fine_proj_ = std::make_unique<FineLatentProjection>(store_, "fine_vae/project", c.latent_dim,
                                                        c.speaker_dim, c.d_model, c.latent_proj, rng);
  }
  duration_ = std::make_unique<DurationDecoder>(
      store_, "duration",
      DurationConfig{dc, c.duration_blocks, c.duration_heads, c.duration_kernel, c.dropout}, rng);
  combiner_ = std::make_unique<PositionalCombiner>(store_, "upsampler", dc, rng);
  decoder_ = std::make_unique<SpecDecoder>(
      store_, "decoder",
      DecoderConfig{c.decoder_kind, c.decoder_blocks, c.decoder_heads, c.decoder_kernel, dc, c.mel_bins,
                    c.dropout},
      rng);
}

TrainingOutput TtsModel::forward(const Batch& batch, const nn::Context& ctx, double beta,
                                         double lambda_dur) const {
  const ModelConfig& c = config_;
  const std::size_t b = batch.batch;
  TrainingOutput out;
  const EncoderOutput enc = (*encoder_)(batch.phonemes, batch.token_mask, ctx);
  const Tensor spk = (*speakers_)(batch.speakers);
  const nn::SequenceMask& frames = batch.layout.mask;

  Tensor latent;
  if (c.variant == train::Variant::kNoVae) {
    latent = Tensor::zeros({b, c.latent_proj});
  } else if (c.variant == train::Variant::kGlobal) {
    const LatentPosterior post = (*global_)(batch.mel, frames, ctx);
    const Tensor z = ctx.rng ? sample_latent(post, *ctx.rng) : post.mean;
    const Tensor kl = kl_divergence(post, global_->prior_mean(batch.speakers));
    out.terms.kl = scale(sum(kl), 1.0 / static_cast<double>(b));
    latent = (*global_proj_)(z);
  } else {
    const PositionalFeatures pos = positional_features(batch.layout, c.fine_position_dim);
    const LatentPosterior post = (*fine_)(batch.mel, frames, pos, spk, enc, ctx);
    const Tensor z = nn::apply_mask(ctx.rng ? sample_latent(post, *ctx.rng) : post.mean, enc.mask);
    const Tensor kl = nn::apply_mask(
        reshape(kl_divergence(post, Tensor::zeros({c.latent_dim})), {b, batch.tokens, 1}), enc.mask);
    out.terms.kl = scale(sum(kl), 1.0 / static_cast<double>(b));
    out.terms.prior = prior_->train(enc, spk, post.mean).loss;
    out.prior_inputs = PriorInputs{{enc.hidden.detach(), enc.mask}, spk.detach(), post.mean.detach()};
    latent = (*fine_proj_)(z, spk, enc);
  }

  const Tensor conditioned = attach_conditioning(enc, spk, latent);
  out.durations = (*duration_)(conditioned, batch.token_mask, ctx);
  const Tensor up = upsample(out.durations.hidden, batch.layout);
  const Tensor x = (*combiner_)(up, positional_features(batch.layout, c.conditioned_width()), frames);
  out.decoded = (*decoder_)(x, frames, ctx);

  for (const Tensor& mel : out.decoded.mels) out.block_l1.push_back(spec_l1(mel, batch.mel, frames));
  if (c.iterative_loss) {
    out.terms.spec = out.block_l1;
  } else {
    out.terms.spec = {out.block_l1.back()};
  }
  const DurationTarget target = make_duration_target(batch.durations, b, batch.tokens, c.frame_rate);
  out.terms.duration = duration_loss(out.durations, target, batch.token_mask).total();
  out.terms.lambda_dur = lambda_dur;
  out.terms.beta = beta;
  out.terms.mel_bins = c.mel_bins;
  out.terms.frames = frames.total();
  out.terms.tokens = batch.token_mask.total();
  out.loss = train::total_loss(c.variant, out.terms);
  return out;
}

InferenceOutput TtsModel::infer(const Batch& batch, DurationSource source) const {
  NoGradGuard no_grad;
  const ModelConfig& c = config_;
  const nn::Context ctx;
  const EncoderOutput enc = (*encoder_)(batch.phonemes, batch.token_mask, ctx);
  const Tensor spk = (*speakers_)(batch.speakers);
  Tensor latent;
  if (c.variant == train::Variant::kNoVae) {
    latent = Tensor::zeros({batch.batch, c.latent_proj});
  } else if (c.variant == train::Variant::kGlobal) {
    latent = (*global_proj_)(global_->prior_mean(batch.speakers));
  } else {
    latent = (*fine_proj_)(prior_->infer(enc, spk), spk, enc);
  }
  return decode_with(batch, enc, attach_conditioning(enc, spk, latent), source);
}

InferenceOutput TtsModel::decode_with(const Batch& batch, const EncoderOutput& enc,
                                              const Tensor& conditioned, DurationSource source) const {
  const nn::Context ctx;
  InferenceOutput out;
  out.predicted = (*duration_)(conditioned, enc.mask, ctx);
  if (source == DurationSource::kTeacher) {
    if (batch.durations.size() != batch.batch * batch.tokens) {
      throw ValueError("teacher-duration inference needs ground-truth durations");
    }
    out.durations = batch.durations;
  } else {
    out.durations = finalize_durations(out.predicted, enc.mask, config_.frame_rate);
  }
  out.layout = frame_layout(out.durations, batch.batch, batch.tokens);
  const Tensor up = upsample(out.predicted.hidden, out.layout);
  const Tensor x =
      (*combiner_)(up, positional_features(out.layout, config_.conditioned_width()), out.layout.mask);
  out.mel = (*decoder_)(x, out.layout.mask, ctx).final();
  return out;
}

InferenceOutput TtsModel::synthesize(const std::vector<std::int64_t>& phonemes,
                                             std::int64_t speaker) const {
  if (phonemes.empty()) throw ValueError("nothing to synthesize");
  for (std::int64_t id : phonemes) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab) {
      throw ValueError("phoneme id " + std::to_string(id) + " out of range");
    }
  }
  Batch b;
  b.batch = 1;
  b.tokens = phonemes.size();
  b.phonemes = phonemes;
  b.speakers = {speaker};
  b.token_mask = nn::SequenceMask::all_valid(1, phonemes.size());
  return infer(b, DurationSource::kPredicted);
}

}  // namespace ptaco::model
