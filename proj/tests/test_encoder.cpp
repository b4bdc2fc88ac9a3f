#include <doctest.h>

#include "ptaco/error.hpp"
#include "ptaco/model/encoder.hpp"
#include "test_util.hpp"

using namespace ptaco;
using namespace ptaco::model;
using nn::SequenceMask;

namespace {

EncoderConfig small_encoder() { return {28, 16, 2, 3, 2, 2, 0.1}; }

void zero_with_prefix(ParameterStore& store, const std::string& prefix) {
  for (Parameter& p : store.parameters()) {
    if (p.name.rfind(prefix, 0) == 0) {
      for (double& v : p.tensor.mutable_values()) v = 0.0;
    }
  }
}

}  // namespace

TEST_CASE("encoder output has the model width and zero padding rows") {
  ParameterStore store;
  Rng rng(1);
  TextEncoder enc(store, "encoder", small_encoder(), rng);
  const std::vector<std::int64_t> ids = {1, 2, 3, 4, 5, 6, 0, 0};
  const auto out = enc(ids, SequenceMask::from_lengths({4, 2}, 4), {});
  CHECK(out.hidden.shape() == Shape{2, 4, 16});
  for (std::size_t n = 2; n < 4; ++n) {
    for (double v : testing::row_values(out.hidden, 1, n)) CHECK(v == 0.0);
  }
}

TEST_CASE("single token with zeroed blocks depends on nothing but its position") {
  ParameterStore store;
  Rng rng(2);
  TextEncoder enc(store, "encoder", small_encoder(), rng);
  zero_with_prefix(store, "encoder/conv");
  zero_with_prefix(store, "encoder/transformer");
  const Tensor pos = token_positions(1, 16);
  for (std::int64_t id : {0, 7, 27}) {
    const auto out = enc(std::vector<std::int64_t>{id}, SequenceMask::all_valid(1, 1), {});
    for (std::size_t c = 0; c < 16; ++c) CHECK(out.hidden.values()[c] == doctest::Approx(pos.values()[c]));
  }
}

TEST_CASE("padded ids do not reach valid encoder outputs") {
  PrecisionGuard high(Precision::kHigh);
  ParameterStore store;
  Rng rng(3);
  TextEncoder enc(store, "encoder", small_encoder(), rng);
  const auto mask = SequenceMask::from_lengths({5, 3}, 5);
  const auto a = enc(std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8, 0, 0}, mask, {});
  const auto b = enc(std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8, 20, 13}, mask, {});
  for (std::size_t i = 0; i < a.hidden.numel(); ++i) CHECK(a.hidden.values()[i] == b.hidden.values()[i]);
  // A row alone and the same row in a longer padded batch agree.
  const auto alone = enc(std::vector<std::int64_t>{6, 7, 8}, SequenceMask::all_valid(1, 3), {});
  for (std::size_t n = 0; n < 3; ++n) {
    const auto x = testing::row_values(alone.hidden, 0, n), y = testing::row_values(a.hidden, 1, n);
    for (std::size_t c = 0; c < x.size(); ++c) CHECK(x[c] == doctest::Approx(y[c]).epsilon(1e-12));
  }
}

TEST_CASE("encoder is equivariant to batch order") {
  PrecisionGuard high(Precision::kHigh);
  ParameterStore store;
  Rng rng(4);
  TextEncoder enc(store, "encoder", small_encoder(), rng);
  const auto ab = enc(std::vector<std::int64_t>{1, 2, 3, 9, 8, 0}, SequenceMask::from_lengths({3, 2}, 3), {});
  const auto ba = enc(std::vector<std::int64_t>{9, 8, 0, 1, 2, 3}, SequenceMask::from_lengths({2, 3}, 3), {});
  for (std::size_t n = 0; n < 3; ++n) {
    const auto x = testing::row_values(ab.hidden, 0, n), y = testing::row_values(ba.hidden, 1, n);
    for (std::size_t c = 0; c < x.size(); ++c) CHECK(x[c] == y[c]);
  }
}

TEST_CASE("conditioning concatenates encoder, speaker and latent channels") {
  ParameterStore store;
  Rng rng(5);
  TextEncoder enc(store, "encoder", small_encoder(), rng);
  SpeakerTable speakers(store, "speakers", 3, 4, rng);
  const auto mask = SequenceMask::from_lengths({3, 3}, 3);
  const auto out = enc(std::vector<std::int64_t>{4, 5, 6, 4, 5, 6}, mask, {});
  const Tensor spk = speakers(std::vector<std::int64_t>{0, 2});
  const Tensor latent = testing::random_tensor({2, 6}, rng);
  const Tensor c = attach_conditioning(out, spk, latent);
  CHECK(c.shape() == Shape{2, 3, 16 + 4 + 6});

  SUBCASE("identical text differs only in speaker channels") {
    const Tensor same_latent = Tensor::from_vector({2, 6}, std::vector<double>(12, 0.3));
    const Tensor c2 = attach_conditioning(out, spk, same_latent);
    for (std::size_t n = 0; n < 3; ++n) {
      const auto x = testing::row_values(c2, 0, n), y = testing::row_values(c2, 1, n);
      for (std::size_t ch = 0; ch < x.size(); ++ch) {
        if (ch >= 16 && ch < 20) {
          CHECK(x[ch] != y[ch]);
        } else {
          CHECK(x[ch] == y[ch]);
        }
      }
    }
  }
  SUBCASE("a global latent is tiled over tokens") {
    for (std::size_t n = 1; n < 3; ++n) {
      const auto first = testing::row_values(c, 0, 0), other = testing::row_values(c, 0, n);
      for (std::size_t ch = 16; ch < first.size(); ++ch) CHECK(first[ch] == other[ch]);
    }
  }
  SUBCASE("masked tokens are zero in every channel") {
    const auto padded = enc(std::vector<std::int64_t>{4, 5, 6, 4, 0, 0}, SequenceMask::from_lengths({3, 1}, 3), {});
    const Tensor cp = attach_conditioning(padded, spk, latent);
    for (std::size_t n = 1; n < 3; ++n) {
      for (double v : testing::row_values(cp, 1, n)) CHECK(v == 0.0);
    }
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(attach_conditioning(out, spk, Tensor::zeros({3, 6})), ShapeError);
    CHECK_THROWS_AS(speakers(std::vector<std::int64_t>{3}), ValueError);
  }
}
