#include "ptaco/suites.hpp"

#include <chrono>
#include <functional>
#include <map>

#include "ptaco/error.hpp"
#include "ptaco/model/model.hpp"
#include "ptaco/nn/blocks.hpp"
#include "ptaco/ops.hpp"

namespace ptaco::suites {

namespace {

constexpr std::size_t kBatch = 2;
constexpr std::size_t kTokens = 5;
constexpr std::size_t kFrames = 12;
constexpr std::size_t kWidth = 16;
constexpr std::size_t kBins = 8;
// The assembled model has thousands of relu/abs inputs, so its screening
// margin is tighter; it still exceeds the largest input shift a 1e-4 step
// produces at these weight scales.
constexpr double kModelMargin = 2.5e-4;

// Everything a suite needs: a store whose parameters are checked, a redraw
// of parameters and inputs, and the scalar loss.
struct Setup {
  ParameterStore store;
  std::function<void(Rng&)> draw_inputs = [](Rng&) {};
  std::function<Tensor()> loss;
};

using Builder = std::function<void(Setup&, Rng&)>;

void fill_uniform(Tensor& t, Rng& rng, double lo, double hi) {
  for (double& v : t.mutable_values()) v = rng.uniform(lo, hi);
}

// Fixed random projection to a scalar so every output entry matters.
Tensor project(const Tensor& x, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(x.numel());
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return sum(mul(x, Tensor::from_vector(x.shape(), std::move(w))));
}

// Input tensors are registered as parameters so their gradients are
// checked along with the module weights.
Tensor input(Setup& s, const std::string& name, const Shape& shape, Rng& rng) {
  return s.store.create("input/" + name, shape, Init::kZeros, rng);
}

const std::vector<std::int64_t>& durations() {
  // Row 0: 12 frames over 5 tokens with a zero; row 1: 9 frames over 4 tokens.
  static const std::vector<std::int64_t> d = {3, 0, 4, 2, 3, 2, 4, 0, 3, 0};
  return d;
}

nn::SequenceMask token_mask() { return nn::SequenceMask::from_lengths({5, 4}, kTokens); }

void block_suite(Setup& s, Rng& rng, const std::function<std::unique_ptr<nn::SequenceBlock>(
                                         ParameterStore&, Rng&)>& make,
                 std::size_t length, std::vector<std::size_t> lengths) {
  std::shared_ptr<nn::SequenceBlock> block = make(s.store, rng);
  const Tensor x = input(s, "x", {kBatch, length, kWidth}, rng);
  const nn::SequenceMask mask = nn::SequenceMask::from_lengths(std::move(lengths), length);
  s.loss = [block, x, mask] { return project((*block)(x, mask, {}), 101); };
}

model::ModelConfig tiny_model(train::Variant variant, nn::BlockKind decoder) {
  model::ModelConfig c;
  c.variant = variant;
  c.decoder_kind = decoder;
  c.iterative_loss = true;
  c.speakers = 2;
  c.mel_bins = kBins;
  c.d_model = 8;
  c.encoder_conv_blocks = 1;
  c.encoder_conv_kernel = 3;
  c.encoder_blocks = 1;
  c.encoder_heads = 2;
  c.speaker_dim = 4;
  c.latent_dim = 3;
  c.latent_proj = 4;
  c.vae_width = 8;
  c.vae_heads = 2;
  c.vae_kernel = 3;
  c.vae_plain_blocks = 1;
  c.vae_strided_blocks = 2;
  c.fine_blocks = 1;
  c.fine_position_dim = 4;
  c.prior_hidden = 6;
  c.duration_blocks = 1;
  c.duration_heads = 2;
  c.duration_kernel = 3;
  c.decoder_blocks = 2;
  c.decoder_heads = 2;
  c.decoder_kernel = 3;
  return c;
}

// The full objective. The model owns its parameters, so the setup store is
// replaced by the model's.
struct LossSuite {
  std::shared_ptr<model::TtsModel> model;
  std::shared_ptr<model::Batch> batch;
};

std::vector<corpus::Utterance> tiny_utterances() {
  std::vector<corpus::Utterance> us(kBatch);
  const auto& d = durations();
  for (std::size_t b = 0; b < kBatch; ++b) {
    corpus::Utterance& u = us[b];
    u.speaker = static_cast<std::int64_t>(b);
    const std::size_t n = b == 0 ? 5 : 4;
    std::int64_t frames = 0;
    for (std::size_t i = 0; i < n; ++i) {
      u.phonemes.push_back(static_cast<std::int64_t>(3 * i + b));
      u.durations.push_back(d[b * kTokens + i]);
      frames += d[b * kTokens + i];
    }
    u.mel_bins = kBins;
    u.mel.assign(static_cast<std::size_t>(frames) * kBins, 0.5);
  }
  return us;
}

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> b = {
      {"lconv",
       [](Setup& s, Rng& rng) {
         block_suite(s, rng, [](ParameterStore& st, Rng& r) {
           return std::make_unique<nn::LConvBlock>(st, "lconv", nn::LConvConfig{kWidth, 2, 3, 0.1, false}, r);
         }, kFrames, {12, 9});
       }},
      {"causal-lconv",
       [](Setup& s, Rng& rng) {
         block_suite(s, rng, [](ParameterStore& st, Rng& r) {
           return std::make_unique<nn::LConvBlock>(st, "lconv", nn::LConvConfig{kWidth, 4, 5, 0.1, true}, r);
         }, kFrames, {12, 7});
       }},
      {"transformer",
       [](Setup& s, Rng& rng) {
         block_suite(s, rng, [](ParameterStore& st, Rng& r) {
           return std::make_unique<nn::TransformerBlock>(st, "transformer",
                                                         nn::TransformerConfig{kWidth, 2, 0.1}, r);
         }, kTokens, {5, 4});
       }},
      {"conv",
       [](Setup& s, Rng& rng) {
         block_suite(s, rng, [](ParameterStore& st, Rng& r) {
           return std::make_unique<nn::ConvBlock>(st, "conv", nn::ConvBlockConfig{kWidth, kWidth, 5, 0.1}, r);
         }, kTokens, {5, 3});
       }},
      {"encoder",
       [](Setup& s, Rng& rng) {
         auto enc = std::make_shared<model::TextEncoder>(
             s.store, "encoder", model::EncoderConfig{28, kWidth, 1, 3, 1, 2, 0.1}, rng);
         const std::vector<std::int64_t> ids = {1, 7, 24, 3, 25, 2, 9, 9, 24, 0};
         s.loss = [enc, ids] { return project((*enc)(ids, token_mask(), {}).hidden, 102); };
       }},
      {"global-posterior",
       [](Setup& s, Rng& rng) {
         model::GlobalVaeConfig c{kBins, kWidth, 2, 3, 1, 2, 3, 2, 0.1};
         auto post = std::make_shared<model::GlobalPosterior>(s.store, "global", c, rng);
         const Tensor mel = input(s, "mel", {kBatch, kFrames, kBins}, rng);
         const nn::SequenceMask frames = nn::SequenceMask::from_lengths({12, 9}, kFrames);
         s.loss = [post, mel, frames] {
           const model::LatentPosterior q = (*post)(mel, frames, {});
           const std::vector<std::int64_t> spk = {1, 0};
           Rng eps(5);
           return add(sum(model::kl_divergence(q, post->prior_mean(spk))),
                      project(model::sample_latent(q, eps), 103));
         };
       }},
      {"fine-posterior",
       [](Setup& s, Rng& rng) {
         model::FineVaeConfig c;
         c.mel_bins = kBins;
         c.d_model = kWidth;
         c.speaker_dim = 4;
         c.position_dim = 4;
         c.heads = 2;
         c.kernel = 3;
         c.blocks = 1;
         c.latent = 3;
         c.prior_hidden = 6;
         auto post = std::make_shared<model::FinePosterior>(s.store, "fine", c, rng);
         const auto layout = std::make_shared<model::FrameLayout>(model::frame_layout(durations(), kBatch, kTokens));
         const Tensor mel = input(s, "mel", {kBatch, layout->frames, kBins}, rng);
         const Tensor speaker = input(s, "speaker", {kBatch, 4}, rng);
         const Tensor hidden = input(s, "encoder", {kBatch, kTokens, kWidth}, rng);
         s.loss = [post, layout, mel, speaker, hidden, c] {
           const model::EncoderOutput enc{mul(hidden, token_mask().column()), token_mask()};
           const auto pos = model::positional_features(*layout, c.position_dim);
           const model::LatentPosterior q = (*post)(mel, layout->mask, pos, speaker, enc, {});
           return add(project(q.mean, 104), project(q.log_variance, 105));
         };
       }},
      {"fine-prior",
       [](Setup& s, Rng& rng) {
         model::FineVaeConfig c;
         c.d_model = kWidth;
         c.speaker_dim = 4;
         c.latent = 3;
         c.prior_hidden = 6;
         auto prior = std::make_shared<model::FinePrior>(s.store, "prior", c, rng);
         // The prior sees detached inputs, so only its own weights are checked.
         auto hidden = std::make_shared<Tensor>(Tensor::zeros({kBatch, kTokens, kWidth}));
         auto speaker = std::make_shared<Tensor>(Tensor::zeros({kBatch, 4}));
         auto teacher = std::make_shared<Tensor>(Tensor::zeros({kBatch, kTokens, 3}));
         s.draw_inputs = [hidden, speaker, teacher](Rng& r) {
           fill_uniform(*hidden, r, -1.0, 1.0);
           fill_uniform(*speaker, r, -1.0, 1.0);
           fill_uniform(*teacher, r, -1.0, 1.0);
         };
         s.loss = [prior, hidden, speaker, teacher] {
           const model::EncoderOutput enc{mul(*hidden, token_mask().column()), token_mask()};
           const auto r = prior->train(enc, *speaker, *teacher);
           return add(r.loss, project(r.means, 106));
         };
       }},
      {"duration",
       [](Setup& s, Rng& rng) {
         auto dec = std::make_shared<model::DurationDecoder>(s.store, "duration",
                                                             model::DurationConfig{kWidth, 1, 2, 3, 0.1}, rng);
         const Tensor x = input(s, "conditioned", {kBatch, kTokens, kWidth}, rng);
         s.loss = [dec, x] {
           const auto pred = (*dec)(x, token_mask(), {});
           const auto target = model::make_duration_target(durations(), kBatch, kTokens, 80.0);
           return model::duration_loss(pred, target, token_mask()).total();
         };
       }},
      {"upsampler",
       [](Setup& s, Rng& rng) {
         auto comb = std::make_shared<model::PositionalCombiner>(s.store, "combiner", kWidth, rng);
         const Tensor hidden = input(s, "hidden", {kBatch, kTokens, kWidth}, rng);
         s.loss = [comb, hidden] {
           const auto layout = model::frame_layout(durations(), kBatch, kTokens);
           const Tensor up = model::upsample(hidden, layout);
           return project((*comb)(up, model::positional_features(layout, kWidth), layout.mask), 107);
         };
       }},
      {"decoder-lconv",
       [](Setup& s, Rng& rng) {
         auto dec = std::make_shared<model::SpecDecoder>(
             s.store, "decoder", model::DecoderConfig{nn::BlockKind::kLConv, 2, 2, 3, kWidth, kBins, 0.1}, rng);
         const Tensor x = input(s, "frames", {kBatch, kFrames, kWidth}, rng);
         auto target = std::make_shared<Tensor>(Tensor::zeros({kBatch, kFrames, kBins}));
         s.draw_inputs = [target](Rng& r) { fill_uniform(*target, r, 0.0, 1.0); };
         s.loss = [dec, x, target] {
           const auto mask = nn::SequenceMask::from_lengths({12, 9}, kFrames);
           return model::iterative_spec_loss((*dec)(x, mask, {}), *target, mask);
         };
       }},
      {"decoder-transformer",
       [](Setup& s, Rng& rng) {
         auto dec = std::make_shared<model::SpecDecoder>(
             s.store, "decoder",
             model::DecoderConfig{nn::BlockKind::kTransformer, 2, 2, 3, kWidth, kBins, 0.1}, rng);
         const Tensor x = input(s, "frames", {kBatch, kFrames, kWidth}, rng);
         auto target = std::make_shared<Tensor>(Tensor::zeros({kBatch, kFrames, kBins}));
         s.draw_inputs = [target](Rng& r) { fill_uniform(*target, r, 0.0, 1.0); };
         s.loss = [dec, x, target] {
           const auto mask = nn::SequenceMask::from_lengths({12, 9}, kFrames);
           return model::iterative_spec_loss((*dec)(x, mask, {}), *target, mask);
         };
       }},
  };
  return b;
}

// Deep copy so later forward passes cannot alias the frozen values.
Tensor frozen_copy(const Tensor& t) {
  return Tensor::from_vector(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

SuiteResult run_model_loss(const std::string& name, train::Variant variant, const GradCheckOptions& options) {
  SuiteResult result;
  result.module = name;
  const auto model = std::make_shared<model::TtsModel>(tiny_model(variant, nn::BlockKind::kLConv), 3);
  auto utterances = std::make_shared<std::vector<corpus::Utterance>>(tiny_utterances());
  auto batch = std::make_shared<model::Batch>(model::make_batch(*utterances, kBins));
  auto forward = [model, batch] {
    Rng eps(9);
    const nn::Context ctx{false, &eps};
    return model->forward(*batch, ctx, 0.7, 1.0);
  };
  Rng rng(17);
  result.draws = draw_away_from_kinks(
      [&](Rng& r) {
        for (Parameter& p : model->parameters().parameters()) fill_uniform(p.tensor, r, -0.5, 0.5);
        std::vector<corpus::Utterance>& us = *utterances;
        for (auto& u : us) {
          for (double& v : u.mel) v = r.uniform(0.0, 1.0);
        }
        *batch = model::make_batch(us, kBins);
      },
      [&] { return forward().loss; }, rng, kModelMargin);

  std::function<Tensor()> loss = [forward] { return forward().loss; };
  if (variant == train::Variant::kFine) {
    // The prior trains on detached inputs, so its term is a stop-gradient
    // objective. Finite differences must hold those inputs at their values
    // from the unperturbed point: swap the live prior term for one evaluated
    // on frozen copies. The analytic gradient is unchanged by the swap.
    const model::TrainingOutput base = forward();
    const model::PriorInputs& in = *base.prior_inputs;
    const auto frozen = std::make_shared<model::PriorInputs>(model::PriorInputs{
        {frozen_copy(in.encoder.hidden), in.encoder.mask}, frozen_copy(in.speaker), frozen_copy(in.teacher)});
    loss = [forward, model, frozen] {
      const model::TrainingOutput out = forward();
      const Tensor fixed = model->fine_prior()->train(frozen->encoder, frozen->speaker, frozen->teacher).loss;
      return add(out.loss, scale(sub(fixed, out.terms.prior), 1.0 / static_cast<double>(out.terms.tokens)));
    };
  }
  result.report = grad_check(loss, model->parameters().parameters(), options);
  return result;
}

}  // namespace

const std::vector<std::string>& module_names() {
  static const std::vector<std::string> names = {
      "lconv",         "causal-lconv",     "transformer",         "conv",
      "encoder",       "global-posterior", "fine-posterior",      "fine-prior",
      "duration",      "upsampler",        "decoder-lconv",       "decoder-transformer",
      "loss-novae",    "loss-global",      "loss-fine"};
  return names;
}

SuiteResult run(const std::string& module, const GradCheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  PrecisionGuard precision(Precision::kHigh);
  SuiteResult result;
  if (module == "loss-novae") {
    result = run_model_loss(module, train::Variant::kNoVae, options);
  } else if (module == "loss-global") {
    result = run_model_loss(module, train::Variant::kGlobal, options);
  } else if (module == "loss-fine") {
    result = run_model_loss(module, train::Variant::kFine, options);
  } else {
    auto it = builders().find(module);
    if (it == builders().end()) throw ValueError("unknown gradcheck module '" + module + "'");
    Setup setup;
    Rng rng(13);
    it->second(setup, rng);
    result.module = module;
    result.draws = draw_away_from_kinks(
        [&](Rng& r) {
          for (Parameter& p : setup.store.parameters()) fill_uniform(p.tensor, r, -0.5, 0.5);
          setup.draw_inputs(r);
        },
        setup.loss, rng);
    result.report = grad_check(setup.loss, setup.store.parameters(), options);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ptaco::suites
