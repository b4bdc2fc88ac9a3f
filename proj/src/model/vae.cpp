#include "ptaco/model/vae.hpp"

#include "ptaco/error.hpp"

namespace ptaco::model {

Tensor sample_latent(const LatentPosterior& post, Rng& rng) {
  std::vector<double> eps(post.mean.numel());
  for (double& e : eps) e = rng.normal();
  const Tensor noise = Tensor::from_vector(post.mean.shape(), std::move(eps));
  return add(post.mean, mul(exp(scale(post.log_variance, 0.5)), noise));
}

Tensor kl_divergence(const LatentPosterior& post, const Tensor& prior_mean) {
  Tensor var = exp(post.log_variance);
  Tensor diff = sub(post.mean, prior_mean);
  Tensor terms = sub(add_scalar(add(var, square(diff)), -1.0), post.log_variance);
  return scale(sum(terms, -1), 0.5);
}

std::size_t downsampled_length(std::size_t frames, std::size_t stages) {
  for (std::size_t i = 0; i < stages; ++i) frames = (frames + 1) / 2;
  return frames;
}

Tensor masked_mean_pool(const Tensor& x, const nn::SequenceMask& mask) {
  std::vector<double> inv(mask.batch());
  for (std::size_t b = 0; b < mask.batch(); ++b) {
    if (mask.length_of(b) == 0) throw ValueError("cannot pool an empty sequence");
    inv[b] = 1.0 / static_cast<double>(mask.length_of(b));
  }
  Tensor pooled = sum(nn::apply_mask(x, mask), 1);
  return mul(pooled, Tensor::from_vector({mask.batch(), 1}, std::move(inv)));
}

GlobalPosterior::GlobalPosterior(ParameterStore& store, const std::string& name,
                                 const GlobalVaeConfig& config, Rng& rng)
    : config_(config),
      input_(store, name + "/input", config.mel_bins, config.width, rng),
      mean_(store, name + "/mean", config.width, config.latent, rng),
      log_variance_(store, name + "/log_variance", config.width, config.latent, rng),
      prior_(store.create(name + "/prior_mean", {config.speakers, config.latent}, Init::kZeros, rng)) {
  const nn::LConvConfig lc{config.width, config.heads, config.kernel, config.dropout, false};
  for (std::size_t i = 0; i < config.plain_blocks; ++i) {
    plain_.push_back(std::make_unique<nn::LConvBlock>(store, name + "/lconv" + std::to_string(i), lc, rng));
  }
  for (std::size_t i = 0; i < config.strided_blocks; ++i) {
    const std::string s = name + "/down" + std::to_string(i);
    stride_weight_.push_back(
        store.create(s + "/conv/weight", {3, config.width, config.width}, Init::kGlorotUniform, rng));
    stride_bias_.push_back(store.create(s + "/conv/bias", {config.width}, Init::kZeros, rng));
    strided_.push_back(std::make_unique<nn::LConvBlock>(store, s + "/lconv", lc, rng));
  }
}

LatentPosterior GlobalPosterior::operator()(const Tensor& mel, const nn::SequenceMask& frames,
                                            const nn::Context& ctx) const {
  if (mel.rank() != 3 || mel.dim(2) != config_.mel_bins) {
    throw ShapeError("global posterior expects [B,T," + std::to_string(config_.mel_bins) + "], got " +
                     shape_str(mel.shape()));
  }
  for (std::size_t len : frames.lengths()) {
    if (len == 0) throw ValueError("global posterior needs at least one frame per utterance");
  }
  nn::SequenceMask mask = frames;
  Tensor x = nn::apply_mask(input_(mel), mask);
  for (const auto& block : plain_) x = (*block)(x, mask, ctx);
  for (std::size_t i = 0; i < strided_.size(); ++i) {
    x = conv1d(nn::apply_mask(x, mask), stride_weight_[i], stride_bias_[i], 2);
    std::vector<std::size_t> lengths = mask.lengths();
    for (std::size_t& l : lengths) l = (l + 1) / 2;
    mask = nn::SequenceMask::from_lengths(std::move(lengths), x.dim(1));
    x = (*strided_[i])(nn::apply_mask(x, mask), mask, ctx);
  }
  Tensor pooled = masked_mean_pool(x, mask);
  return {mean_(pooled), log_variance_(pooled)};
}

Tensor GlobalPosterior::prior_mean(std::span<const std::int64_t> speakers) const {
  for (std::int64_t id : speakers) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.speakers) {
      throw ValueError("speaker id " + std::to_string(id) + " has no prior");
    }
  }
  return embedding(prior_, speakers, {speakers.size()});
}

FinePosterior::FinePosterior(ParameterStore& store, const std::string& name,
                             const FineVaeConfig& config, Rng& rng)
    : config_(config),
      input_(store, name + "/input",
             config.mel_bins + 2 * config.position_dim + 1 + config.speaker_dim, config.d_model, rng),
      query_norm_(store, name + "/query_norm", config.d_model, rng),
      mean_(store, name + "/mean", config.d_model, config.latent, rng),
      log_variance_(store, name + "/log_variance", config.d_model, config.latent, rng) {
  const nn::LConvConfig lc{config.d_model, config.heads, config.kernel, config.dropout, false};
  for (std::size_t i = 0; i < config.blocks; ++i) {
    blocks_.push_back(std::make_unique<nn::LConvBlock>(store, name + "/lconv" + std::to_string(i), lc, rng));
  }
}

LatentPosterior FinePosterior::operator()(const Tensor& mel, const nn::SequenceMask& frames,
                                          const PositionalFeatures& positions, const Tensor& speaker,
                                          const EncoderOutput& enc, const nn::Context& ctx,
                                          Tensor* attention) const {
  const std::size_t b = mel.dim(0), t = mel.dim(1);
  for (const Tensor* f : {&positions.within, &positions.duration, &positions.fraction}) {
    if (f->rank() != 3 || f->dim(0) != b || f->dim(1) != t) {
      throw ShapeError("positional features " + shape_str(f->shape()) + " do not match mel " +
                       shape_str(mel.shape()));
    }
  }
  if (frames.batch() != b || frames.length() != t) throw ShapeError("frame mask does not match mel");
  Tensor x = concat({mel, positions.within, positions.duration, positions.fraction,
                     broadcast_to(reshape(speaker, {b, 1, speaker.dim(1)}), {b, t, speaker.dim(1)})},
                    -1);
  x = nn::apply_mask(input_(x), frames);
  for (const auto& block : blocks_) x = (*block)(x, frames, ctx);
  Tensor bias = reshape(frames.key_bias(), {b, 1, t});
  Tensor pooled = nn::attend(query_norm_(enc.hidden), x, x, bias, attention);
  return {nn::apply_mask(mean_(pooled), enc.mask), nn::apply_mask(log_variance_(pooled), enc.mask)};
}

FinePrior::FinePrior(ParameterStore& store, const std::string& name, const FineVaeConfig& config,
                     Rng& rng)
    : config_(config),
      cell_(store, name + "/lstm", config.speaker_dim + config.d_model + config.latent,
            config.prior_hidden, rng),
      output_(store, name + "/output", config.prior_hidden, config.latent, rng) {}

Tensor FinePrior::step_inputs(const Tensor& enc, const Tensor& speaker, std::size_t n) const {
  const std::size_t b = enc.dim(0);
  return concat({speaker, reshape(slice(enc, 1, n, 1), {b, enc.dim(2)})}, -1);
}

FinePrior::Result FinePrior::train(const EncoderOutput& enc, const Tensor& speaker,
                                   const Tensor& teacher) const {
  if (!teacher.defined()) throw ValueError("fine prior training needs teacher latents");
  const std::size_t b = enc.hidden.dim(0), n = enc.hidden.dim(1), l = config_.latent;
  if (teacher.shape() != Shape{b, n, l}) {
    throw ShapeError("teacher latents must be [B,N," + std::to_string(l) + "], got " +
                     shape_str(teacher.shape()));
  }
  const Tensor e = enc.hidden.detach();
  const Tensor s = speaker.detach();
  const Tensor target = teacher.detach();
  auto state = cell_.initial(b);
  Tensor prev = Tensor::zeros({b, l});
  std::vector<Tensor> preds;
  for (std::size_t i = 0; i < n; ++i) {
    state = cell_.step(concat({step_inputs(e, s, i), prev}, -1), state);
    preds.push_back(reshape(output_(state.h), {b, 1, l}));
    prev = reshape(slice(target, 1, i, 1), {b, l});
  }
  Tensor means = nn::apply_mask(concat(preds, 1), enc.mask);
  Tensor err = nn::apply_mask(sub(means, target), enc.mask);
  Tensor loss = scale(sum(square(err)), 1.0 / static_cast<double>(l));
  return {means, loss};
}

Tensor FinePrior::infer(const EncoderOutput& enc, const Tensor& speaker) const {
  const std::size_t b = enc.hidden.dim(0), n = enc.hidden.dim(1), l = config_.latent;
  const Tensor e = enc.hidden.detach();
  const Tensor s = speaker.detach();
  auto state = cell_.initial(b);
  Tensor prev = Tensor::zeros({b, l});
  std::vector<Tensor> preds;
  for (std::size_t i = 0; i < n; ++i) {
    state = cell_.step(concat({step_inputs(e, s, i), prev}, -1), state);
    prev = output_(state.h);
    preds.push_back(reshape(prev, {b, 1, l}));
  }
  return nn::apply_mask(concat(preds, 1), enc.mask);
}

GlobalLatentProjection::GlobalLatentProjection(ParameterStore& store, const std::string& name,
                                               std::size_t latent, std::size_t out, Rng& rng)
    : linear_(store, name, latent, out, rng) {}

FineLatentProjection::FineLatentProjection(ParameterStore& store, const std::string& name,
                                           std::size_t latent, std::size_t speaker_dim,
                                           std::size_t d_model, std::size_t out, Rng& rng)
    : linear_(store, name, latent + speaker_dim + d_model, out, rng) {}

Tensor FineLatentProjection::operator()(const Tensor& latent, const Tensor& speaker,
                                        const EncoderOutput& enc) const {
  const std::size_t n = enc.hidden.dim(1);
  Tensor x = concat({latent, tile_tokens(speaker, n), enc.hidden}, -1);
  return nn::apply_mask(linear_(x), enc.mask);
}

}  // namespace ptaco::model
