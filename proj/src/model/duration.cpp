#include "ptaco/model/duration.hpp"

#include <cmath>

#include "ptaco/error.hpp"

namespace ptaco::model {

DurationTarget make_duration_target(std::span<const std::int64_t> frames, std::size_t batch,
                                    std::size_t tokens, double frame_rate) {
  if (frames.size() != batch * tokens) throw ShapeError("duration targets do not match [B,N]");
  std::vector<double> sec(frames.size()), nz(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    sec[i] = static_cast<double>(frames[i]) / frame_rate;
    nz[i] = frames[i] > 0 ? 1.0 : 0.0;
  }
  return {std::vector<std::int64_t>(frames.begin(), frames.end()),
          Tensor::from_vector({batch, tokens}, std::move(sec)),
          Tensor::from_vector({batch, tokens}, std::move(nz))};
}

DurationDecoder::DurationDecoder(ParameterStore& store, const std::string& name,
                                 const DurationConfig& config, Rng& rng)
    : config_(config),
      gate_(store, name + "/gate", config.width, 1, rng),
      seconds_(store, name + "/seconds", config.width, 1, rng) {
  const nn::LConvConfig lc{config.width, config.heads, config.kernel, config.dropout, false};
  for (std::size_t i = 0; i < config.blocks; ++i) {
    blocks_.push_back(std::make_unique<nn::LConvBlock>(store, name + "/lconv" + std::to_string(i), lc, rng));
  }
}

DurationPrediction DurationDecoder::operator()(const Tensor& conditioned,
                                               const nn::SequenceMask& mask,
                                               const nn::Context& ctx) const {
  Tensor x = conditioned;
  for (const auto& block : blocks_) x = (*block)(x, mask, ctx);
  const std::size_t b = x.dim(0), n = x.dim(1);
  Tensor logit = reshape(gate_(x), {b, n});
  return {logit, sigmoid(logit), reshape(softplus(seconds_(x)), {b, n}), x};
}

DurationLoss duration_loss(const DurationPrediction& pred, const DurationTarget& target,
                           const nn::SequenceMask& mask) {
  const Tensor m = Tensor::from_vector(pred.logit.shape(),
                                       std::vector<double>(mask.values().begin(), mask.values().end()));
  // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
  Tensor ce = sub(softplus(pred.logit), mul(target.nonzero, pred.logit));
  Tensor l1 = abs(sub(pred.seconds, target.seconds));
  return {sum(mul(ce, m)), sum(mul(l1, m))};
}

std::vector<std::int64_t> finalize_durations(std::span<const double> p_z,
                                             std::span<const double> seconds, double frame_rate) {
  if (p_z.size() != seconds.size()) throw ShapeError("p_z and seconds differ in length");
  std::vector<std::int64_t> frames(p_z.size());
  double running = 0.0;
  std::int64_t emitted = 0;
  for (std::size_t i = 0; i < p_z.size(); ++i) {
    const double s = p_z[i] < kNonZeroThreshold ? 0.0 : seconds[i];
    running += s * frame_rate;
    const auto boundary = static_cast<std::int64_t>(std::llround(running));
    frames[i] = boundary - emitted;
    emitted = boundary;
  }
  if (emitted <= 0) throw RuntimeFailure("every token was gated to zero duration");
  return frames;
}

std::vector<std::int64_t> finalize_durations(const DurationPrediction& pred,
                                             const nn::SequenceMask& mask, double frame_rate) {
  const std::size_t b = mask.batch(), n = mask.length();
  std::vector<std::int64_t> out(b * n, 0);
  const auto pz = pred.p_z.values();
  const auto sec = pred.seconds.values();
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t len = mask.length_of(i);
    const auto row = finalize_durations(pz.subspan(i * n, len), sec.subspan(i * n, len), frame_rate);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return out;
}

}  // namespace ptaco::model
