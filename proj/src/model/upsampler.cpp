#include "ptaco/model/upsampler.hpp"

#include <algorithm>

#include "ptaco/error.hpp"

namespace ptaco::model {

FrameLayout frame_layout(std::span<const std::int64_t> durations, std::size_t batch,
                         std::size_t tokens) {
  if (durations.size() != batch * tokens) throw ShapeError("durations do not match [B,N]");
  std::vector<std::size_t> totals(batch, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t n = 0; n < tokens; ++n) {
      const std::int64_t f = durations[b * tokens + n];
      if (f < 0) {
        throw ValueError("negative duration " + std::to_string(f) + " at token " + std::to_string(n));
      }
      totals[b] += static_cast<std::size_t>(f);
    }
    if (totals[b] == 0) throw ValueError("utterance " + std::to_string(b) + " has no frames");
  }
  FrameLayout layout;
  layout.batch = batch;
  layout.frames = *std::max_element(totals.begin(), totals.end());
  const std::size_t t_max = layout.frames;
  layout.token.assign(batch * t_max, -1);
  layout.within.assign(batch * t_max, 0.0);
  layout.length.assign(batch * t_max, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t t = 0;
    for (std::size_t n = 0; n < tokens; ++n) {
      const auto f = static_cast<std::size_t>(durations[b * tokens + n]);
      for (std::size_t j = 0; j < f; ++j, ++t) {
        layout.token[b * t_max + t] = static_cast<std::int64_t>(n);
        layout.within[b * t_max + t] = static_cast<double>(j);
        layout.length[b * t_max + t] = static_cast<double>(f);
      }
    }
  }
  layout.mask = nn::SequenceMask::from_lengths(std::move(totals), t_max);
  return layout;
}

Tensor upsample(const Tensor& hidden, const FrameLayout& layout) {
  if (hidden.rank() != 3 || hidden.dim(0) != layout.batch) {
    throw ShapeError("upsample expects [B,N,d], got " + shape_str(hidden.shape()));
  }
  return gather_rows(hidden, layout.token, layout.frames);
}

PositionalFeatures positional_features(const FrameLayout& layout, std::size_t d) {
  const std::size_t b = layout.batch, t = layout.frames;
  const auto mask = layout.mask.values();
  Tensor within = nn::sinusoidal_embedding(layout.within, d);
  Tensor duration = nn::sinusoidal_embedding(layout.length, d);
  std::vector<double> w(within.values().begin(), within.values().end());
  std::vector<double> u(duration.values().begin(), duration.values().end());
  std::vector<double> frac(b * t, 0.0);
  for (std::size_t i = 0; i < b * t; ++i) {
    if (mask[i] == 0.0) {
      std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(i * d), d, 0.0);
      std::fill_n(u.begin() + static_cast<std::ptrdiff_t>(i * d), d, 0.0);
    } else {
      frac[i] = layout.within[i] / layout.length[i];
    }
  }
  return {Tensor::from_vector({b, t, d}, std::move(w)), Tensor::from_vector({b, t, d}, std::move(u)),
          Tensor::from_vector({b, t, 1}, std::move(frac))};
}

PositionalCombiner::PositionalCombiner(ParameterStore& store, const std::string& name, std::size_t d,
                                       Rng& rng)
    : logits_(store.create(name + "/logits", {3, d}, Init::kZeros, rng)),
      fraction_(store, name + "/fraction", 1, d, rng) {}

Tensor PositionalCombiner::operator()(const Tensor& upsampled, const PositionalFeatures& features,
                                      const nn::SequenceMask& mask) const {
  const std::size_t d = logits_.dim(1);
  if (upsampled.rank() != 3 || upsampled.dim(2) != d) {
    throw ShapeError("combiner expects [B,T," + std::to_string(d) + "], got " +
                     shape_str(upsampled.shape()));
  }
  Tensor w = weights();
  Tensor lifted = fraction_(features.fraction);
  Tensor blend = add(add(mul(features.within, reshape(slice(w, 0, 0, 1), {d})),
                         mul(features.duration, reshape(slice(w, 0, 1, 1), {d}))),
                     mul(lifted, reshape(slice(w, 0, 2, 1), {d})));
  return mul(add(upsampled, blend), mask.column());
}

}  // namespace ptaco::model
