#include <doctest.h>

#include <cmath>

#include "ptaco/checkpoint.hpp"
#include "ptaco/corpus/corpus.hpp"
#include "ptaco/error.hpp"
#include "ptaco/model/decoder.hpp"
#include "ptaco/train/config.hpp"
#include "ptaco/train/trainer.hpp"
#include "test_util.hpp"

using namespace ptaco;
using namespace ptaco::train;

namespace {

LossTerms terms_with(Variant v, std::vector<double> spec, double dur, double kl, double prior) {
  LossTerms t;
  for (double s : spec) t.spec.push_back(Tensor::scalar(s));
  t.duration = Tensor::scalar(dur);
  if (v != Variant::kNoVae) t.kl = Tensor::scalar(kl);
  if (v == Variant::kFine) t.prior = Tensor::scalar(prior);
  t.lambda_dur = 0.7;
  t.beta = 0.3;
  t.mel_bins = 8;
  t.frames = 25;
  t.tokens = 6;
  return t;
}

model::ModelConfig tiny_config(Variant variant) {
  model::ModelConfig c;
  c.variant = variant;
  c.mel_bins = 8;
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
  c.decoder_blocks = 2;
  c.decoder_heads = 2;
  c.decoder_kernel = 3;
  return c;
}

std::vector<corpus::Utterance> tiny_corpus(std::size_t count) {
  corpus::CorpusSpec spec;
  spec.mel_bins = 8;
  spec.max_words = 2;
  spec.max_word_phonemes = 2;
  spec.seed = 5;
  return corpus::generate(spec, count);
}

TrainConfig tiny_train(std::size_t steps) {
  TrainConfig t;
  t.seed = 21;
  t.batch_size = 3;
  t.total_steps = steps;
  t.lr = {0.1, 10, 20, 80, 0.01};
  t.kl = {5, 40, 1.0, 1.0};
  return t;
}

bool same_params(const ParameterStore& a, const ParameterStore& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto x = a.parameters()[i].tensor.values(), y = b.parameters()[i].tensor.values();
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] != y[j]) return false;
    }
  }
  return true;
}

bool same_metrics(const StepMetrics& a, const StepMetrics& b) {
  return a.step == b.step && a.lr == b.lr && a.beta == b.beta && a.loss == b.loss && a.spec == b.spec &&
         a.duration == b.duration && a.kl == b.kl && a.prior == b.prior && a.grad_norm == b.grad_norm;
}

}  // namespace

TEST_CASE("total loss assembly") {
  SUBCASE("all components zero") {
    CHECK(total_loss(Variant::kFine, terms_with(Variant::kFine, {0, 0}, 0, 0, 0)).item() == 0.0);
  }
  SUBCASE("hand-computed sums") {
    const double kt = 8 * 25, n = 6;
    const double base = (1.5 + 2.5) / kt + 0.7 * 3.0 / n;
    CHECK(total_loss(Variant::kNoVae, terms_with(Variant::kNoVae, {1.5, 2.5}, 3.0, 0, 0)).item() ==
          doctest::Approx(base).epsilon(1e-15));
    CHECK(total_loss(Variant::kGlobal, terms_with(Variant::kGlobal, {1.5, 2.5}, 3.0, 2.0, 0)).item() ==
          doctest::Approx(base + 0.3 * 2.0).epsilon(1e-15));
    CHECK(total_loss(Variant::kFine, terms_with(Variant::kFine, {1.5, 2.5}, 3.0, 2.0, 1.2)).item() ==
          doctest::Approx(base + 0.3 * 2.0 + 1.2 / n).epsilon(1e-15));
  }
  SUBCASE("spectrogram contribution is linear") {
    const auto t1 = terms_with(Variant::kNoVae, {1.5, 2.5}, 0.0, 0, 0);
    const auto t2 = terms_with(Variant::kNoVae, {3.0, 5.0}, 0.0, 0, 0);
    CHECK(total_loss(Variant::kNoVae, t2).item() == 2.0 * total_loss(Variant::kNoVae, t1).item());
  }
  SUBCASE("zero beta reduces the global objective to the plain one") {
    auto g = terms_with(Variant::kGlobal, {1.5, 2.5}, 3.0, 2.0, 0);
    g.beta = 0.0;
    g.kl = g.kl.detach();
    CHECK(total_loss(Variant::kGlobal, g).item() ==
          total_loss(Variant::kNoVae, terms_with(Variant::kNoVae, {1.5, 2.5}, 3.0, 0, 0)).item());
  }
  SUBCASE("mismatches are rejected") {
    CHECK_THROWS_AS(total_loss(Variant::kNoVae, terms_with(Variant::kGlobal, {1}, 1, 1, 0)), ValueError);
    CHECK_THROWS_AS(total_loss(Variant::kFine, terms_with(Variant::kGlobal, {1}, 1, 1, 0)), ValueError);
    CHECK_THROWS_AS(total_loss(Variant::kGlobal, terms_with(Variant::kFine, {1}, 1, 1, 1)), ValueError);
    auto t = terms_with(Variant::kGlobal, {1}, 1, 1, 0);
    t.beta = -1.0;
    CHECK_THROWS_AS(total_loss(Variant::kGlobal, t), ValueError);
    t = terms_with(Variant::kGlobal, {}, 1, 1, 0);
    CHECK_THROWS_AS(total_loss(Variant::kGlobal, t), ValueError);
  }
}

TEST_CASE("frame padding leaves the normalized spectrogram loss unchanged") {
  PrecisionGuard high(Precision::kHigh);
  Rng rng(1);
  const Tensor pred = testing::random_tensor({1, 5, 4}, rng);
  const Tensor target = testing::random_tensor({1, 5, 4}, rng);
  std::vector<double> pp(9 * 4, 0.0), tp(9 * 4, 0.0);
  std::copy(pred.values().begin(), pred.values().end(), pp.begin());
  std::copy(target.values().begin(), target.values().end(), tp.begin());
  for (std::size_t i = 20; i < 36; ++i) tp[i] = rng.uniform();
  auto loss = [](const Tensor& p, const Tensor& t, const nn::SequenceMask& m) {
    LossTerms terms;
    terms.spec = {model::spec_l1(p, t, m)};
    terms.duration = Tensor::scalar(0.0);
    terms.mel_bins = 4;
    terms.frames = m.total();
    terms.tokens = 1;
    return total_loss(Variant::kNoVae, terms).item();
  };
  CHECK(loss(pred, target, nn::SequenceMask::all_valid(1, 5)) ==
        doctest::Approx(loss(Tensor::from_vector({1, 9, 4}, pp), Tensor::from_vector({1, 9, 4}, tp),
                             nn::SequenceMask::from_lengths({5}, 9)))
            .epsilon(1e-15));
}

TEST_CASE("learning-rate schedule") {
  const LrSchedule lr;  // warmup 100, decay 200 -> 1000, floor 0.01
  CHECK(lr(0) == doctest::Approx(0.1));
  CHECK(lr(100) == doctest::Approx(1.0));
  CHECK(lr(150) == 1.0);
  CHECK(lr(200) == 1.0);
  CHECK(lr(600) == doctest::Approx(std::sqrt(1.0 * 0.01)));
  CHECK(lr(1000) == doctest::Approx(0.01));
  CHECK(lr(5000) == 0.01);
  // Continuity: adjacent steps never jump by more than one step's slope.
  const double warm_slope = 0.9 / 100.0;
  const double decay_slope = std::log(100.0) / 800.0;
  for (std::size_t s = 0; s < 1100; ++s) {
    CHECK(std::fabs(lr(s + 1) - lr(s)) <= std::max(warm_slope, decay_slope) + 1e-12);
  }
}

TEST_CASE("KL weight schedule") {
  const KlSchedule kl;  // fine: 0 until 60, linear to 1 at 500
  CHECK(kl(Variant::kFine, 0) == 0.0);
  CHECK(kl(Variant::kFine, 60) == 0.0);
  CHECK(kl(Variant::kFine, 280) == doctest::Approx(0.5));
  CHECK(kl(Variant::kFine, 500) == 1.0);
  CHECK(kl(Variant::kFine, 100000) == 1.0);
  CHECK(kl(Variant::kGlobal, 0) == 1.0);
  CHECK(kl(Variant::kGlobal, 777) == 1.0);
  CHECK(kl(Variant::kNoVae, 300) == 0.0);
  for (std::size_t s = 0; s < 600; ++s) {
    CHECK(kl(Variant::kFine, s + 1) >= kl(Variant::kFine, s));
    CHECK(kl(Variant::kFine, s + 1) - kl(Variant::kFine, s) <= 1.0 / 440.0 + 1e-12);
  }
}

TEST_CASE("global norm clipping") {
  PrecisionGuard high(Precision::kHigh);
  std::vector<Parameter> params(2);
  params[0].tensor = Tensor::zeros({2}, true);
  params[1].tensor = Tensor::zeros({1}, true);
  auto set = [&](double a, double b, double c) {
    auto g0 = params[0].tensor.mutable_grad();
    g0[0] = a;
    g0[1] = b;
    params[1].tensor.mutable_grad()[0] = c;
  };
  SUBCASE("norm 10 is rescaled to 0.2") {
    set(6.0, 0.0, 8.0);
    CHECK(clip_global_norm(params, 0.2) == doctest::Approx(10.0));
    CHECK(global_grad_norm(params) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(params[0].tensor.grad()[0] == doctest::Approx(0.12));
  }
  SUBCASE("small gradients pass unchanged") {
    set(0.1, 0.05, -0.1);
    clip_global_norm(params, 0.2);
    CHECK(params[1].tensor.grad()[0] == -0.1);
  }
  SUBCASE("random gradients end within the limit") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const double s = std::pow(10.0, rng.uniform(-3.0, 3.0));
      set(rng.normal() * s, rng.normal() * s, rng.normal() * s);
      clip_global_norm(params, 0.2);
      CHECK(global_grad_norm(params) <= 0.2 + 1e-9);
    }
  }
}

TEST_CASE("Nesterov steps match a hand-stepped quadratic") {
  PrecisionGuard high(Precision::kHigh);
  const std::vector<double> a = {1.0, 3.0, 0.5}, c = {0.2, -1.0, 2.0};
  std::vector<Parameter> params(1);
  params[0].name = "w";
  params[0].tensor = Tensor::from_vector({3}, {1.0, 1.0, 1.0}, true);
  Nesterov opt(0.9);
  std::vector<double> w = {1.0, 1.0, 1.0}, v(3, 0.0);
  const double lr = 0.05;
  for (int step = 0; step < 5; ++step) {
    params[0].tensor.zero_grad();
    const Tensor d = sub(params[0].tensor, Tensor::from_vector({3}, c));
    scale(sum(mul(Tensor::from_vector({3}, a), square(d))), 0.5).backward();
    opt.step(params, lr);
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = a[i] * (w[i] - c[i]);
      v[i] = 0.9 * v[i] + g;
      w[i] -= lr * (g + 0.9 * v[i]);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(params[0].tensor.values()[i] == doctest::Approx(w[i]).epsilon(1e-15));
}

TEST_CASE("batch selection") {
  Rng rng(4);
  CHECK(select_batch(5, 8, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  const auto picked = select_batch(20, 6, rng);
  CHECK(picked.size() == 6);
  for (std::size_t i = 1; i < picked.size(); ++i) CHECK(picked[i] > picked[i - 1]);
  CHECK(picked.back() < 20);
}

TEST_CASE("config files") {
  SUBCASE("defaults round-trip through the text form") {
    RunConfig c;
    c.model.variant = Variant::kFine;
    c.train.kl.final = 0.5;
    const RunConfig back = parse_config(format_config(c));
    CHECK(config_entries(back) == config_entries(c));
  }
  SUBCASE("every problem is reported at once") {
    try {
      parse_config("bogus = 1\nd_model = x\nmomentum = 1.5\nnot a pair\n");
      FAIL("expected a ValueError");
    } catch (const ValueError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("unknown key 'bogus'") != std::string::npos);
      CHECK(msg.find("d_model") != std::string::npos);
      CHECK(msg.find("momentum") != std::string::npos);
      CHECK(msg.find("line 4") != std::string::npos);
    }
  }
  SUBCASE("the fine variant needs its beta schedule") {
    CHECK_THROWS_WITH_AS(parse_config("variant = fine\nbeta_start_step = 10\n"),
                         doctest::Contains("beta_end_step"), ValueError);
    CHECK_NOTHROW(parse_config("variant = fine  # phoneme level\nbeta_start_step = 10\nbeta_end_step = 20\n"
                               "beta_final = 1\n"));
    CHECK_THROWS_AS(parse_config("beta_start_step = 1\n", {{"variant", "fine"}}), ValueError);
  }
  SUBCASE("overrides replace file values") {
    const RunConfig c = parse_config("decoder = lconv\n", {{"decoder", "transformer"}, {"iterative_loss", "off"}});
    CHECK(c.model.decoder_kind == nn::BlockKind::kTransformer);
    CHECK_FALSE(c.model.iterative_loss);
  }
  SUBCASE("duplicate keys and inconsistent schedules") {
    CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2\n"), ValueError);
    CHECK_THROWS_AS(parse_config("warmup_steps = 300\ndecay_start = 200\n"), ValueError);
  }
}

TEST_CASE("identically seeded 100-step runs are bit-identical") {
  const auto data = tiny_corpus(6);
  for (Variant v : {Variant::kNoVae, Variant::kGlobal, Variant::kFine}) {
    CAPTURE(variant_name(v));
    model::TtsModel m1(tiny_config(v), 3), m2(tiny_config(v), 3);
    Trainer t1(m1, tiny_train(100), data), t2(m2, tiny_train(100), data);
    bool identical = true;
    while (!t1.done()) identical = identical && same_metrics(t1.step(), t2.step());
    CHECK(identical);
    CHECK(same_params(m1.parameters(), m2.parameters()));
  }
}

TEST_CASE("training decreases the loss") {
  const auto data = tiny_corpus(4);
  model::TtsModel m(tiny_config(Variant::kNoVae), 3);
  TrainConfig cfg = tiny_train(60);
  cfg.batch_size = 4;
  Trainer t(m, cfg, data);
  const double first = t.step().loss;
  double last = first;
  while (!t.done()) last = t.step().loss;
  CHECK(last < 0.5 * first);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  const auto data = tiny_corpus(6);
  model::TtsModel full(tiny_config(Variant::kFine), 3);
  Trainer straight(full, tiny_train(12), data);
  std::vector<StepMetrics> expected;
  while (!straight.done()) expected.push_back(straight.step());

  model::TtsModel first(tiny_config(Variant::kFine), 3);
  Trainer head(first, tiny_train(12), data);
  for (int i = 0; i < 7; ++i) head.step();
  const auto bytes = encode_checkpoint(head.checkpoint());

  model::TtsModel second(tiny_config(Variant::kFine), 99);
  Trainer tail(second, tiny_train(12), data);
  tail.resume(decode_checkpoint(bytes));
  CHECK(tail.current_step() == 7);
  bool identical = true;
  while (!tail.done()) {
    const StepMetrics m = tail.step();
    identical = identical && same_metrics(m, expected[m.step]);
  }
  CHECK(identical);
  CHECK(same_params(full.parameters(), second.parameters()));
}

TEST_CASE("non-finite losses abort with step diagnostics") {
  auto data = tiny_corpus(2);
  data[0].mel[0] = std::nan("");
  model::TtsModel m(tiny_config(Variant::kNoVae), 3);
  Trainer t(m, tiny_train(5), data);
  CHECK_THROWS_WITH_AS(t.step(), doctest::Contains("step 0"), RuntimeFailure);
}

TEST_CASE("evaluation metrics") {
  const auto data = tiny_corpus(4);
  model::TtsModel m(tiny_config(Variant::kGlobal), 3);
  const EvalReport teacher = evaluate(m, data, EvalMode::kTeacher);
  REQUIRE(teacher.utterances.size() == 4);
  std::size_t tokens = 0, zeros = 0;
  for (const auto& u : data) {
    tokens += u.phonemes.size();
    for (auto d : u.durations) zeros += d == 0;
  }
  // The untrained gate sits near p = 0.5 < 0.99, so every token is called
  // zero-length and accuracy equals the share of zero-length tokens.
  CHECK(teacher.nonzero_accuracy == doctest::Approx(static_cast<double>(zeros) / static_cast<double>(tokens)));
  for (const auto& u : teacher.utterances) CHECK(u.predicted_frames == u.target_frames);
  CHECK(teacher.spec_l1 > 0.0);
  const EvalReport free = evaluate(m, data, EvalMode::kFreeRunning);
  CHECK(free.failures == 4);
}
