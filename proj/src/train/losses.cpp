#include "ptaco/train/losses.hpp"

#include "ptaco/error.hpp"
#include "ptaco/ops.hpp"

namespace ptaco::train {

Variant parse_variant(const std::string& name) {
  if (name == "novae") return Variant::kNoVae;
  if (name == "global") return Variant::kGlobal;
  if (name == "fine") return Variant::kFine;
  throw ValueError("unknown variant '" + name + "' (expected novae, global, or fine)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kNoVae:
      return "novae";
    case Variant::kGlobal:
      return "global";
    case Variant::kFine:
      return "fine";
  }
  return "unknown";
}

Tensor total_loss(Variant variant, const LossTerms& terms) {
  const bool wants_kl = variant != Variant::kNoVae;
  const bool wants_prior = variant == Variant::kFine;
  const std::string v = variant_name(variant);
  if (terms.kl.defined() != wants_kl) {
    throw ValueError(std::string(wants_kl ? "missing" : "unexpected") + " KL term for variant " + v);
  }
  if (terms.prior.defined() != wants_prior) {
    throw ValueError(std::string(wants_prior ? "missing" : "unexpected") + " prior loss for variant " + v);
  }
  if (terms.spec.empty() || !terms.duration.defined()) {
    throw ValueError("spectrogram and duration terms are required");
  }
  if (terms.mel_bins == 0 || terms.frames == 0 || terms.tokens == 0) {
    throw ValueError("loss normalizers must be positive");
  }
  if (terms.beta < 0.0) throw ValueError("beta must be non-negative");

  Tensor spec = terms.spec[0];
  for (std::size_t i = 1; i < terms.spec.size(); ++i) spec = add(spec, terms.spec[i]);
  const double kt = static_cast<double>(terms.mel_bins * terms.frames);
  const double n = static_cast<double>(terms.tokens);
  Tensor total = add(scale(spec, 1.0 / kt), scale(terms.duration, terms.lambda_dur / n));
  if (wants_kl) total = add(total, scale(terms.kl, terms.beta));
  if (wants_prior) total = add(total, scale(terms.prior, 1.0 / n));
  return total;
}

}  // namespace ptaco::train
