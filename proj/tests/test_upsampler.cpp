#include <doctest.h>

#include <cmath>

#include "ptaco/model/upsampler.hpp"
#include "ptaco/nn/layers.hpp"
#include "test_util.hpp"

using namespace ptaco;
using namespace ptaco::model;
using nn::SequenceMask;

TEST_CASE("frame layout and upsampling") {
  const FrameLayout layout = frame_layout(std::vector<std::int64_t>{2, 0, 3}, 1, 3);
  CHECK(layout.frames == 5);
  CHECK(layout.token == std::vector<std::int64_t>{0, 0, 2, 2, 2});
  CHECK(layout.within == std::vector<double>{0, 1, 0, 1, 2});
  CHECK(layout.length == std::vector<double>{2, 2, 3, 3, 3});

  SUBCASE("unit durations copy the input") {
    Rng rng(1);
    const Tensor h = testing::random_tensor({1, 4, 3}, rng);
    const Tensor up = upsample(h, frame_layout(std::vector<std::int64_t>{1, 1, 1, 1}, 1, 4));
    for (std::size_t i = 0; i < h.numel(); ++i) CHECK(up.values()[i] == h.values()[i]);
  }
  SUBCASE("each token's gradient is its frame count") {
    Tensor h = Tensor::zeros({1, 3, 2}, true);
    sum(upsample(h, layout)).backward();
    CHECK(std::vector<double>(h.grad().begin(), h.grad().end()) == std::vector<double>{2, 2, 0, 0, 3, 3});
  }
  SUBCASE("frame count equals the duration sum per row") {
    const FrameLayout l2 = frame_layout(std::vector<std::int64_t>{1, 2, 0, 4, 0, 0}, 2, 3);
    CHECK(l2.frames == 4);
    CHECK(l2.mask.length_of(0) == 3);
    CHECK(l2.mask.length_of(1) == 4);
    CHECK(l2.token[3] == -1);
  }
}

TEST_CASE("positional features") {
  const FrameLayout layout = frame_layout(std::vector<std::int64_t>{4, 0, 1, 1}, 2, 2);
  const auto f = positional_features(layout, 6);
  const std::size_t t = layout.frames;
  CHECK(t == 4);
  // Frames 0..3 of a 4-frame token progress 0, .25, .5, .75.
  for (std::size_t j = 0; j < 4; ++j) CHECK(f.fraction.values()[j] == 0.25 * static_cast<double>(j));
  // First frame: sinusoid(0) = [0,1,0,1,...].
  for (std::size_t c = 0; c < 6; ++c) CHECK(f.within.values()[c] == (c % 2 == 0 ? 0.0 : 1.0));
  // Duration embedding is constant inside a token and differs across lengths.
  const auto d = f.duration.values();
  for (std::size_t c = 0; c < 6; ++c) {
    CHECK(d[6 + c] == d[c]);
    CHECK(d[3 * 6 + c] == d[c]);
  }
  bool differs = false;
  for (std::size_t c = 0; c < 6; ++c) differs = differs || d[4 * 6 + c] != d[c];
  CHECK(differs);
  // Padded frames of row 1 carry no features.
  for (std::size_t j = 2; j < 4; ++j) {
    CHECK(f.fraction.values()[t + j] == 0.0);
    for (std::size_t c = 0; c < 6; ++c) CHECK(f.within.values()[(t + j) * 6 + c] == 0.0);
  }
}

TEST_CASE("positional combiner weights") {
  ParameterStore store;
  Rng rng(2);
  PositionalCombiner comb(store, "combiner", 4, rng);
  const FrameLayout layout = frame_layout(std::vector<std::int64_t>{3, 2}, 1, 2);
  const auto feats = positional_features(layout, 4);
  const Tensor up = testing::random_tensor({1, 5, 4}, rng);

  SUBCASE("equal logits weight every source by a third") {
    const Tensor weights = comb.weights();
    for (double w : weights.values()) CHECK(w == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("weights form a simplex per channel") {
    testing::randomize(store, rng, 3.0);
    const Tensor weights = comb.weights();
    const auto w = weights.values();
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(w[k * 4 + c] >= 0.0);
        s += w[k * 4 + c];
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("a saturated first logit passes the within-token sinusoid") {
    Tensor logits = comb.logits();
    auto v = logits.mutable_values();
    for (std::size_t c = 0; c < 4; ++c) {
      v[c] = 50.0;
      v[4 + c] = -50.0;
      v[8 + c] = -50.0;
    }
    const Tensor out = comb(up, feats, layout.mask);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      CHECK(out.values()[i] == doctest::Approx(up.values()[i] + feats.within.values()[i]).epsilon(1e-9));
    }
  }
}
