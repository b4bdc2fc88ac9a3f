#include "ptaco/model/decoder.hpp"

#include <algorithm>

#include "ptaco/error.hpp"

namespace ptaco::model {

SpecDecoder::SpecDecoder(ParameterStore& store, const std::string& name,
                         const DecoderConfig& config, Rng& rng)
    : config_(config) {
  if (config.blocks == 0) throw ValueError("decoder needs at least one block");
  for (std::size_t i = 0; i < config.blocks; ++i) {
    const std::string b = name + "/block" + std::to_string(i);
    blocks_.push_back(nn::make_block(config.kind, store, b, config.width, config.heads, config.kernel,
                                     config.dropout, rng));
    projections_.emplace_back(store, b + "/mel", config.width, config.mel_bins, rng);
  }
}

DecoderOutput SpecDecoder::operator()(const Tensor& frames, const nn::SequenceMask& mask,
                                      const nn::Context& ctx) const {
  DecoderOutput out;
  Tensor x = frames;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    x = (*blocks_[i])(x, mask, ctx);
    out.mels.push_back(nn::apply_mask(projections_[i](x), mask));
  }
  return out;
}

Tensor spec_l1(const Tensor& pred, const Tensor& target, const nn::SequenceMask& mask) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  }
  return sum(nn::apply_mask(abs(sub(pred, target)), mask));
}

namespace {

double normalizer(const Tensor& target, const nn::SequenceMask& mask) {
  const std::size_t valid = mask.total();
  if (valid == 0) throw ValueError("spectrogram loss over zero frames");
  return 1.0 / static_cast<double>(target.dim(-1) * valid);
}

}  // namespace

Tensor iterative_spec_loss(const DecoderOutput& out, const Tensor& target,
                           const nn::SequenceMask& mask) {
  Tensor total = spec_l1(out.mels[0], target, mask);
  for (std::size_t i = 1; i < out.mels.size(); ++i) total = add(total, spec_l1(out.mels[i], target, mask));
  return scale(total, normalizer(target, mask));
}

Tensor single_spec_loss(const DecoderOutput& out, const Tensor& target,
                        const nn::SequenceMask& mask) {
  return scale(spec_l1(out.final(), target, mask), normalizer(target, mask));
}

ArSimDecoder::ArSimDecoder(ParameterStore& store, const std::string& name,
                           const DecoderConfig& config, Rng& rng)
    : config_(config),
      prenet_(store, name + "/prenet", config.mel_bins, config.width, rng),
      projection_(store, name + "/mel", config.width, config.mel_bins, rng) {
  for (std::size_t i = 0; i < config.blocks; ++i) {
    blocks_.push_back(std::make_unique<nn::LConvBlock>(
        store, name + "/block" + std::to_string(i),
        nn::LConvConfig{config.width, config.heads, config.kernel, config.dropout, true}, rng));
  }
}

std::size_t ArSimDecoder::receptive_field() const {
  return config_.blocks * (config_.kernel - 1) + 1;
}

Tensor ArSimDecoder::operator()(const Tensor& frames) const {
  const std::size_t b = frames.dim(0), t = frames.dim(1), d = config_.width, k = config_.mel_bins;
  if (frames.rank() != 3 || frames.dim(2) != d) {
    throw ShapeError("ar-sim decoder expects [B,T," + std::to_string(d) + "]");
  }
  NoGradGuard no_grad;
  const nn::Context ctx;
  std::vector<double> inputs(b * t * d, 0.0);  // frame features + prenet(previous mel)
  std::vector<double> mels(b * t * k, 0.0);
  const auto fv = frames.values();
  Tensor previous = Tensor::zeros({b, k});
  for (std::size_t step = 0; step < t; ++step) {
    const Tensor fed = prenet_(previous);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        inputs[(i * t + step) * d + c] = fv[(i * t + step) * d + c] + fed.values()[i * d + c];
      }
    }
    const std::size_t start = step + 1 > receptive_field() ? step + 1 - receptive_field() : 0;
    const std::size_t window = step + 1 - start;
    std::vector<double> win(b * window * d);
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>((i * t + start) * d), window * d,
                  win.begin() + static_cast<std::ptrdiff_t>(i * window * d));
    }
    Tensor x = Tensor::from_vector({b, window, d}, std::move(win));
    const auto mask = nn::SequenceMask::all_valid(b, window);
    for (const auto& block : blocks_) x = (*block)(x, mask, ctx);
    const Tensor mel = projection_(reshape(slice(x, 1, window - 1, 1), {b, d}));
    for (std::size_t i = 0; i < b; ++i) {
      std::copy_n(mel.values().begin() + static_cast<std::ptrdiff_t>(i * k), k,
                  mels.begin() + static_cast<std::ptrdiff_t>((i * t + step) * k));
    }
    previous = mel;
  }
  return Tensor::from_vector({b, t, k}, std::move(mels));
}

}  // namespace ptaco::model
