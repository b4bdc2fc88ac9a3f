#include <doctest.h>

#include <cmath>

#include "ptaco/error.hpp"
#include "ptaco/model/model.hpp"
#include "test_util.hpp"

using namespace ptaco;
using namespace ptaco::model;
using nn::SequenceMask;

namespace {

DurationPrediction prediction(const Shape& shape, std::vector<double> logit, std::vector<double> seconds) {
  Tensor z = Tensor::from_vector(shape, std::move(logit));
  return {z, sigmoid(z), Tensor::from_vector(shape, std::move(seconds)), Tensor()};
}

double softplus_ref(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

TEST_CASE("finalize_durations examples") {
  CHECK(finalize_durations(std::vector<double>{0.995}, std::vector<double>{0.10}, 80.0) ==
        std::vector<std::int64_t>{8});
  CHECK(finalize_durations(std::vector<double>{0.5, 0.999}, std::vector<double>{0.3, 0.05}, 80.0) ==
        std::vector<std::int64_t>{0, 4});
  CHECK(finalize_durations(std::vector<double>(3, 0.999), std::vector<double>(3, 0.0125), 80.0) ==
        std::vector<std::int64_t>{1, 1, 1});
  // Per-token rounding would give 1+1+1 = 3 for 0.99 * 0.0125 * 80 = 0.99
  // each; cumulative rounding keeps the total at round(2.97) = 3 too, but for
  // 0.6 frames each it gives round(1.8) = 2 rather than 3.
  CHECK(finalize_durations(std::vector<double>(3, 0.999), std::vector<double>(3, 0.6 / 80.0), 80.0) ==
        std::vector<std::int64_t>{1, 0, 1});
  CHECK_THROWS_AS(finalize_durations(std::vector<double>{0.5, 0.2}, std::vector<double>{1.0, 1.0}, 80.0),
                  RuntimeFailure);
}

TEST_CASE("finalize_durations preserves total length on fuzzed inputs") {
  Rng rng(99);
  std::size_t checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(1, 40));
    const double rate = rng.uniform(20.0, 200.0);
    std::vector<double> pz(n), s(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pz[i] = rng.uniform() < 0.3 ? rng.uniform(0.0, 0.99) : rng.uniform(0.99, 1.0);
      s[i] = rng.uniform(0.0, 0.25);
      if (pz[i] >= 0.99) total += rate * s[i];
    }
    const auto expected = static_cast<std::int64_t>(std::llround(total));
    if (expected <= 0) {
      CHECK_THROWS_AS(finalize_durations(pz, s, rate), RuntimeFailure);
      continue;
    }
    const auto f = finalize_durations(pz, s, rate);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(f[i] >= 0);
      if (pz[i] < 0.99) REQUIRE(f[i] == 0);
      sum += f[i];
    }
    REQUIRE(sum == expected);
    ++checked;
  }
  CHECK(checked > 9000);
}

TEST_CASE("batched finalize handles padded tokens") {
  const auto pred = prediction({2, 3}, {8, 8, 8, 8, -8, 8}, {0.1, 0.05, 0.2, 0.025, 0.5, 9.0});
  const auto f = finalize_durations(pred, SequenceMask::from_lengths({3, 2}, 3), 80.0);
  CHECK(f == std::vector<std::int64_t>{8, 4, 16, 2, 0, 0});
}

TEST_CASE("duration loss values") {
  PrecisionGuard high(Precision::kHigh);
  const auto target = make_duration_target(std::vector<std::int64_t>{4, 0, 8, 2, 0, 0}, 2, 3, 80.0);
  const auto mask = SequenceMask::from_lengths({3, 2}, 3);

  SUBCASE("p_z = 0.5 costs ln 2 per valid token") {
    const auto loss = duration_loss(prediction({2, 3}, std::vector<double>(6, 0.0), std::vector<double>(6, 0.0)),
                                    target, mask);
    CHECK(loss.ce.item() == doctest::Approx(5.0 * std::log(2.0)));
  }
  SUBCASE("perfect seconds give zero L1") {
    const auto loss = duration_loss(prediction({2, 3}, std::vector<double>(6, 0.0),
                                               {0.05, 0.0, 0.1, 0.025, 0.0, 7.0}),
                                    target, mask);
    CHECK(loss.l1.item() == 0.0);
  }
  SUBCASE("random case against a scalar loop") {
    Rng rng(3);
    std::vector<double> z(6), s(6);
    for (auto& v : z) v = rng.uniform(-4.0, 4.0);
    for (auto& v : s) v = rng.uniform(0.0, 0.2);
    const auto loss = duration_loss(prediction({2, 3}, z, s), target, mask);
    const std::vector<double> secs = {0.05, 0.0, 0.1, 0.025, 0.0, 0.0};
    double ce = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      if (i == 5) continue;  // padded
      const double y = secs[i] > 0 ? 1.0 : 0.0;
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      ce += -(y * std::log(p) + (1 - y) * std::log(1 - p));
      l1 += std::fabs(s[i] - secs[i]);
    }
    CHECK(loss.ce.item() == doctest::Approx(ce).epsilon(1e-12));
    CHECK(loss.l1.item() == doctest::Approx(l1).epsilon(1e-12));
    CHECK(softplus_ref(0.0) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("L1 detects a uniform shift") {
    std::vector<double> s = {0.3, 0.2, 0.4, 0.1, 0.5, 0.0};
    const auto base = duration_loss(prediction({2, 3}, std::vector<double>(6, 0.0), s), target, mask);
    for (auto& v : s) v += 0.01;
    const auto shifted = duration_loss(prediction({2, 3}, std::vector<double>(6, 0.0), s), target, mask);
    CHECK(shifted.l1.item() - base.l1.item() == doctest::Approx(5 * 0.01).epsilon(1e-12));
  }
}

TEST_CASE("duration decoder") {
  PrecisionGuard high(Precision::kHigh);
  ParameterStore store;
  Rng rng(4);
  DurationDecoder dec(store, "duration", {8, 2, 2, 3, 0.1}, rng);
  testing::randomize(store, rng, 1.0);

  SUBCASE("seconds are strictly positive") {
    const auto pred = dec(testing::random_tensor({2, 6, 8}, rng, false, -20.0, 20.0),
                          SequenceMask::all_valid(2, 6), {});
    for (double v : pred.seconds.values()) CHECK(v > 0.0);
  }
  SUBCASE("padding does not change the loss") {
    const Tensor x = testing::random_tensor({1, 3, 8}, rng);
    std::vector<double> padded(5 * 8, 0.0);
    std::copy(x.values().begin(), x.values().end(), padded.begin());
    for (std::size_t i = 24; i < 40; ++i) padded[i] = rng.uniform(-1.0, 1.0);
    const auto short_loss = duration_loss(dec(x, SequenceMask::all_valid(1, 3), {}),
                                          make_duration_target(std::vector<std::int64_t>{3, 0, 5}, 1, 3, 80.0),
                                          SequenceMask::all_valid(1, 3));
    const auto mask = SequenceMask::from_lengths({3}, 5);
    const auto long_loss = duration_loss(dec(Tensor::from_vector({1, 5, 8}, padded), mask, {}),
                                         make_duration_target(std::vector<std::int64_t>{3, 0, 5, 0, 0}, 1, 5, 80.0),
                                         mask);
    CHECK(short_loss.total().item() == doctest::Approx(long_loss.total().item()).epsilon(1e-12));
  }
}

TEST_CASE("spectrogram loss has no gradient path into the duration heads") {
  ModelConfig c;
  c.variant = train::Variant::kNoVae;
  c.mel_bins = 6;
  c.d_model = 8;
  c.encoder_conv_blocks = 1;
  c.encoder_blocks = 1;
  c.encoder_heads = 2;
  c.speaker_dim = 4;
  c.latent_proj = 4;
  c.duration_blocks = 1;
  c.duration_heads = 2;
  c.decoder_blocks = 1;
  c.decoder_heads = 2;
  c.decoder_kernel = 3;
  TtsModel model(c, 2);
  corpus::Utterance u;
  u.phonemes = {1, 2, 3, 4};
  u.durations = {2, 0, 3, 1};
  u.mel_bins = 6;
  u.mel.assign(6 * 6, 0.3);
  const auto out = model.forward(make_batch(std::vector<corpus::Utterance>{u}, 6), {}, 1.0, 1.0);
  model.parameters().zero_grad();
  out.block_l1.back().backward();
  std::size_t heads = 0;
  for (const Parameter& p : model.parameters().parameters()) {
    if (p.name.rfind("duration/gate", 0) == 0 || p.name.rfind("duration/seconds", 0) == 0) {
      ++heads;
      if (p.tensor.has_grad()) {
        for (double g : p.tensor.grad()) CHECK(g == 0.0);
      }
    }
  }
  CHECK(heads == 4);
  // The predicted durations never drive the training-mode frame layout.
  CHECK(out.decoded.final().dim(1) == 6);
}
