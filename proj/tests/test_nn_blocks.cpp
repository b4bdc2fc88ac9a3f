#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ptaco/error.hpp"
#include "ptaco/gradcheck.hpp"
#include "ptaco/nn/blocks.hpp"
#include "test_util.hpp"

using namespace ptaco;
using namespace ptaco::nn;
using testing::random_tensor;
using testing::randomize;

namespace {

// Copies x [B,T,d] into a zero tensor of extent `frames` along axis 1.
Tensor pad_frames(const Tensor& x, std::size_t frames, Rng& rng) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  std::vector<double> out(b * frames * d);
  for (double& v : out) v = rng.uniform(-3.0, 3.0);  // garbage in padded slots
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t c = 0; c < d; ++c) out[(i * frames + j) * d + c] = x.at({i, j, c});
    }
  }
  return Tensor::from_vector({b, frames, d}, std::move(out));
}

double max_valid_diff(const Tensor& a, const Tensor& b, std::size_t t) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t c = 0; c < a.dim(2); ++c) {
        worst = std::max(worst, std::abs(a.at({i, j, c}) - b.at({i, j, c})));
      }
    }
  }
  return worst;
}

void check_masking_invariance(const SequenceBlock& block, std::size_t d, Rng& rng) {
  PrecisionGuard standard(Precision::kStandard);
  const Tensor x = random_tensor({2, 7, d}, rng);
  const Tensor y = block(x, SequenceMask::all_valid(2, 7), {});
  const Tensor padded = pad_frames(x, 11, rng);
  const SequenceMask mask = SequenceMask::from_lengths({7, 7}, 11);
  const Tensor yp = block(padded, mask, {});
  CHECK(max_valid_diff(y, yp, 7) <= 1e-5);
  for (std::size_t j = 7; j < 11; ++j) CHECK(yp.at({1, j, 0}) == 0.0);
}

void check_batch_order(const SequenceBlock& block, std::size_t d, Rng& rng) {
  const Tensor x = random_tensor({3, 6, d}, rng);
  const SequenceMask mask = SequenceMask::from_lengths({6, 4, 5}, 6);
  const Tensor y = block(x, mask, {});
  // Reverse the batch.
  std::vector<double> rev(x.numel());
  const std::size_t row = 6 * d;
  for (std::size_t b = 0; b < 3; ++b) {
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(b * row), row,
                rev.begin() + static_cast<std::ptrdiff_t>((2 - b) * row));
  }
  const Tensor yr = block(Tensor::from_vector(x.shape(), rev), SequenceMask::from_lengths({5, 4, 6}, 6), {});
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < row; ++i) {
      CHECK(y.values()[b * row + i] == yr.values()[(2 - b) * row + i]);
    }
  }
}

}  // namespace

TEST_CASE("lightweight conv kernel parameters vs a dense convolution") {
  ParameterStore store;
  Rng rng(1);
  LConvBlock block(store, "b", {128, 8, 17, 0.1, false}, rng);
  const std::size_t lconv = block.kernel_logits().numel();
  const std::size_t dense = 128u * 128u * 17u;
  CHECK(lconv == 136);
  CHECK(dense == 278528);
  CHECK(dense / lconv == 2048);
  CHECK(dense % lconv == 0);
}

TEST_CASE("lightweight conv with a single tap is the identity") {
  Rng rng(2);
  const Tensor x = random_tensor({2, 5, 8}, rng);
  const Tensor logits = random_tensor({4, 1}, rng);
  const Tensor y = lightweight_conv(x, logits, {});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("normalized taps sum to one per head") {
  Rng rng(3);
  const Tensor logits = random_tensor({8, 17}, rng, false, -4.0, 4.0);
  const Tensor taps = softmax(logits, -1);
  for (std::size_t h = 0; h < 8; ++h) {
    double s = 0.0;
    for (std::size_t j = 0; j < 17; ++j) s += taps.at({h, j});
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("head count must divide the width") {
  ParameterStore store;
  Rng rng(4);
  CHECK_THROWS_AS(LConvBlock(store, "b", {10, 4, 3, 0.1, false}, rng), ShapeError);
  CHECK_THROWS_AS(TransformerBlock(store, "t", {10, 3, 0.1}, rng), ShapeError);
}

TEST_CASE("lconv block with zero projections passes its input through") {
  ParameterStore store;
  Rng rng(5);
  LConvBlock block(store, "b", {8, 2, 3, 0.1, false}, rng);
  for (Parameter& p : store.parameters()) {
    if (p.name.find("weight") != std::string::npos) {
      for (double& v : p.tensor.mutable_values()) v = 0.0;
    }
  }
  const Tensor x = random_tensor({2, 4, 8}, rng);
  const Tensor y = block(x, SequenceMask::all_valid(2, 4), {});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("blocks preserve shape") {
  ParameterStore store;
  Rng rng(6);
  LConvBlock lconv(store, "l", {16, 4, 5, 0.1, false}, rng);
  TransformerBlock attn(store, "t", {16, 4, 0.1}, rng);
  ConvBlock conv(store, "c", {16, 16, 5, 0.1}, rng);
  for (std::size_t t : {1u, 3u, 9u}) {
    const Tensor x = random_tensor({3, t, 16}, rng);
    const SequenceMask mask = SequenceMask::all_valid(3, t);
    CHECK(lconv(x, mask, {}).shape() == x.shape());
    CHECK(attn(x, mask, {}).shape() == x.shape());
    CHECK(conv(x, mask, {}).shape() == x.shape());
  }
}

TEST_CASE("masking invariance for every block") {
  ParameterStore store;
  Rng rng(7);
  LConvBlock lconv(store, "l", {8, 2, 5, 0.1, false}, rng);
  TransformerBlock attn(store, "t", {8, 2, 0.1}, rng);
  ConvBlock conv(store, "c", {8, 8, 5, 0.1}, rng);
  randomize(store, rng);
  check_masking_invariance(lconv, 8, rng);
  check_masking_invariance(attn, 8, rng);
  check_masking_invariance(conv, 8, rng);
}

TEST_CASE("batch order invariance for every block") {
  ParameterStore store;
  Rng rng(8);
  LConvBlock lconv(store, "l", {8, 2, 5, 0.1, false}, rng);
  TransformerBlock attn(store, "t", {8, 2, 0.1}, rng);
  ConvBlock conv(store, "c", {8, 8, 3, 0.1}, rng);
  randomize(store, rng);
  check_batch_order(lconv, 8, rng);
  check_batch_order(attn, 8, rng);
  check_batch_order(conv, 8, rng);
}

TEST_CASE("attention over a single position returns its value projection") {
  ParameterStore store;
  Rng rng(9);
  TransformerBlock attn(store, "t", {8, 2, 0.0}, rng);
  randomize(store, rng);
  const Tensor x = random_tensor({2, 1, 8}, rng);
  const SequenceMask mask = SequenceMask::all_valid(2, 1);
  Tensor weights;
  const Tensor out = attn.attention(x, mask, &weights);
  for (double w : weights.values()) CHECK(w == 1.0);

  // Oracle: output(value(norm1(x))).
  const auto& p = store;
  Tensor n = layer_norm(x, p.at("t/norm1/gain").tensor, p.at("t/norm1/bias").tensor);
  Tensor v = add(matmul(n, p.at("t/value/weight").tensor), p.at("t/value/bias").tensor);
  Tensor expected = add(matmul(v, p.at("t/output/weight").tensor), p.at("t/output/bias").tensor);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    CHECK(out.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("attention rows sum to one over valid keys") {
  ParameterStore store;
  Rng rng(10);
  TransformerBlock attn(store, "t", {8, 2, 0.0}, rng);
  randomize(store, rng, 1.0);
  const Tensor x = random_tensor({2, 6, 8}, rng);
  const SequenceMask mask = SequenceMask::from_lengths({6, 3}, 6);
  Tensor w;
  attn.attention(x, mask, &w);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t q = 0; q < 6; ++q) {
        double s = 0.0;
        for (std::size_t k = 0; k < 6; ++k) {
          const double v = w.values()[((b * 2 + h) * 6 + q) * 6 + k];
          if (!mask.valid(b, k)) CHECK(v == 0.0);
          s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
    }
  }
}

namespace {

void check_block_gradients(ParameterStore& store, const SequenceBlock& block, const Shape& shape,
                           const SequenceMask& mask, Rng& rng) {
  Tensor x;
  auto loss = [&] { return testing::project_to_scalar(block(x, mask, {})); };
  draw_away_from_kinks(
      [&](Rng& r) {
        randomize(store, r);
        x = random_tensor(shape, r);
      },
      loss, rng);
  const auto report = grad_check(loss, store.parameters());
  for (const auto& e : report.entries) {
    CHECK_MESSAGE(e.passed, e.name, " rel ", e.max_rel_error, " at ", e.worst_index, ": ",
                  e.worst_analytic, " vs ", e.worst_numeric);
  }
  CHECK(report.max_rel_error <= 1e-4);
}

}  // namespace

TEST_CASE("gradient checks of the blocks") {
  Rng rng(11);
  SUBCASE("lconv block") {
    ParameterStore store;
    LConvBlock block(store, "l", {8, 2, 3, 0.1, false}, rng);
    check_block_gradients(store, block, {2, 5, 8}, SequenceMask::from_lengths({5, 3}, 5), rng);
  }
  SUBCASE("causal lconv block") {
    ParameterStore store;
    LConvBlock block(store, "l", {8, 4, 5, 0.1, true}, rng);
    check_block_gradients(store, block, {2, 6, 8}, SequenceMask::from_lengths({6, 4}, 6), rng);
  }
  SUBCASE("transformer block") {
    ParameterStore store;
    TransformerBlock block(store, "t", {8, 2, 0.1}, rng);
    check_block_gradients(store, block, {2, 5, 8}, SequenceMask::from_lengths({5, 4}, 5), rng);
  }
  SUBCASE("conv block") {
    ParameterStore store;
    ConvBlock block(store, "c", {6, 8, 5, 0.1}, rng);
    check_block_gradients(store, block, {2, 5, 6}, SequenceMask::from_lengths({5, 2}, 5), rng);
  }
}

TEST_CASE("kink screening rejects draws near a relu corner") {
  Tensor w = Tensor::from_vector({1}, {0.0}, true);
  double next = 0.001;
  auto loss = [&] { return sum(relu(w)); };
  Rng rng(1);
  const std::size_t attempts = draw_away_from_kinks(
      [&](Rng&) {
        w.mutable_values()[0] = next;
        next += 0.01;
      },
      loss, rng, 0.025);
  CHECK(attempts == 4);
}

TEST_CASE("dropout only acts in training mode and is seeded") {
  ParameterStore store;
  Rng rng(12);
  LConvBlock block(store, "l", {8, 2, 3, 0.5, false}, rng);
  randomize(store, rng);
  const Tensor x = random_tensor({1, 4, 8}, rng);
  const SequenceMask mask = SequenceMask::all_valid(1, 4);
  const Tensor a = block(x, mask, {});
  const Tensor b = block(x, mask, {});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.values()[i] == b.values()[i]);
  Rng r1(3), r2(3);
  const Tensor t1 = block(x, mask, {true, &r1});
  const Tensor t2 = block(x, mask, {true, &r2});
  bool differs = false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    CHECK(t1.values()[i] == t2.values()[i]);
    differs = differs || t1.values()[i] != a.values()[i];
  }
  CHECK(differs);
}

TEST_CASE("sinusoidal embedding values") {
  const std::vector<double> zero{0.0};
  const Tensor e0 = sinusoidal_embedding(zero, 6);
  for (std::size_t c = 0; c < 6; ++c) CHECK(e0.at({0, c}) == (c % 2 == 0 ? 0.0 : 1.0));

  const std::vector<double> one{1.0};
  const Tensor e1 = sinusoidal_embedding(one, 4);
  const double f = std::pow(10000.0, -0.5);
  CHECK(e1.at({0, 0}) == doctest::Approx(std::sin(1.0)).epsilon(1e-15));
  CHECK(e1.at({0, 1}) == doctest::Approx(std::cos(1.0)).epsilon(1e-15));
  CHECK(e1.at({0, 2}) == doctest::Approx(std::sin(f)).epsilon(1e-15));
  CHECK(e1.at({0, 3}) == doctest::Approx(std::cos(f)).epsilon(1e-15));

  std::vector<double> many(50);
  std::iota(many.begin(), many.end(), 0.0);
  for (double& p : many) p *= 7.31;
  const Tensor big = sinusoidal_embedding(many, 16);
  for (double v : big.values()) CHECK(std::abs(v) <= 1.0);

  CHECK_THROWS_AS(sinusoidal_embedding(one, 5), ValueError);
}
